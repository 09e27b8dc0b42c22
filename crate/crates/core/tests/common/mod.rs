//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use gravpanel::estimators::fixed_effects;
use gravpanel::gravity::{build_dataset, DatasetOptions};
use gravpanel::report::tables::TableRow;
use gravpanel::report::{prepare_panels, run_pipeline, PipelineConfig, DIAGNOSTIC_ROWS};
use gravpanel::{DesignMatrix, Relation};
use nalgebra::{DMatrix, DVector};
use regex::Regex;

/// Slopes from OLS on `[X, D]` with one dummy per entity, solved by SVD.
pub fn lsdv_slopes(m: &DesignMatrix) -> Vec<f64> {
    let (n, k) = (m.n_rows(), m.n_cols());
    let g = m.n_entities();
    let mut a = DMatrix::zeros(n, k + g);
    a.columns_mut(0, k).copy_from(m.x());
    for (r, &e) in m.entity_of_row().iter().enumerate() {
        a[(r, k + e)] = 1.0;
    }
    let svd = a.svd(true, true);
    let b = svd.solve(m.y(), 1e-12).expect("svd solve");
    b.rows(0, k).iter().copied().collect()
}

/// `n u'Z(Z'Z)^{-1}Z'u / u'u` built from the normal equations.
pub fn sargan_oracle(m: &DesignMatrix, instruments: &[&str], u: &DVector<f64>) -> f64 {
    let n = m.n_rows();
    let mut z = DMatrix::from_element(n, instruments.len() + 1, 1.0);
    for (j, name) in instruments.iter().enumerate() {
        z.set_column(j + 1, &m.column(name).expect("instrument column"));
    }
    let ztz = z.transpose() * &z;
    let ztu = z.transpose() * u;
    let coef = ztz.cholesky().expect("Z'Z positive definite").solve(&ztu);
    let explained = (ztu.transpose() * coef)[(0, 0)];
    n as f64 * explained / u.norm_squared()
}

fn bundled_config() -> PipelineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic.cfg");
    PipelineConfig::load(&path).expect("bundled config loads").0
}

/// Reduces report text to its layout: hashes, numbers and stars masked.
pub fn skeleton(text: &str) -> String {
    let sha = Regex::new(r"\b[0-9a-f]{64}\b").unwrap();
    let number = Regex::new(r"-?\d+(\.\d+)?").unwrap();
    let stars = Regex::new(r"#\*{1,3}").unwrap();
    let s = sha.replace_all(text, "<sha256>");
    let s = number.replace_all(&s, "#");
    stars.replace_all(&s, "#").into_owned()
}

/// Key columns of a CSV (labels and coordinates, never values), all rows.
pub fn csv_keys(text: &str) -> String {
    const KEYS: [&str; 8] = ["section", "row", "reporter", "column", "year", "variable", "entity", "period"];
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.expect("csv row")).collect();
    let Some(header) = rows.first() else {
        return String::new();
    };
    let keep: Vec<usize> = (0..header.len()).filter(|&j| KEYS.contains(&&header[j])).collect();
    rows.iter()
        .map(|row| keep.iter().map(|&j| &row[j]).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

fn golden(name: &str, actual: &str) -> Result<(), String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("GRAVPANEL_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let line = expected
        .lines()
        .zip(actual.lines())
        .position(|(a, b)| a != b)
        .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()));
    Err(format!("{name} differs from golden at line {}", line + 1))
}

fn stars_for(p: f64) -> &'static str {
    match p {
        p if p <= 0.01 => "***",
        p if p <= 0.05 => "**",
        p if p <= 0.10 => "*",
        _ => "",
    }
}

/// Runs the bundled pipeline twice and checks determinism, the golden
/// layout, table shapes and star placement.
pub fn structural_check() -> Result<String, String> {
    let cfg = bundled_config();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut reports = Vec::new();
    for d in &dirs {
        let report = run_pipeline(&cfg).map_err(|e| e.to_string())?;
        report.write_to(d.path()).map_err(|e| e.to_string())?;
        reports.push(report);
    }
    let mut names: Vec<String> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for n in &names {
        let a = fs::read(dirs[0].path().join(n)).unwrap();
        let b = fs::read(dirs[1].path().join(n)).map_err(|e| format!("{n} missing on rerun: {e}"))?;
        if a != b {
            return Err(format!("{n} differs between identical runs"));
        }
    }

    let read = |n: &str| fs::read_to_string(dirs[0].path().join(n)).map_err(|e| format!("{n}: {e}"));
    golden("report_skeleton.md", &skeleton(&read("report.md")?))?;
    let mut keys = String::new();
    for n in names.iter().filter(|n| n.ends_with(".csv")) {
        keys += &format!("== {n}\n{}\n", csv_keys(&read(n)?));
    }
    golden("csv_keys.txt", &keys)?;

    let report = &reports[0];
    let regs = &report.regression_tables;
    if regs.len() != 4 {
        return Err(format!("{} regression tables, expected 4", regs.len()));
    }
    for t in regs {
        if t.columns.len() != 12 || t.notes.len() != 7 {
            return Err(format!("{}: {} columns, {} notes", t.key, t.columns.len(), t.notes.len()));
        }
        let labels: Vec<&str> = t
            .rows
            .iter()
            .filter_map(|r| match r {
                TableRow::Data { label, .. } => Some(label.as_str()),
                TableRow::Section(_) => None,
            })
            .collect();
        if labels[labels.len() - DIAGNOSTIC_ROWS.len()..] != DIAGNOSTIC_ROWS {
            return Err(format!("{}: diagnostic rows {:?}", t.key, labels));
        }
        for r in t.records.iter().filter(|r| r.row == "Observations" && r.column != "2SLS" && !r.column.starts_with("2SLS")) {
            if r.display != "84" {
                return Err(format!("{} {} {} observations {}", t.key, r.reporter, r.column, r.display));
            }
        }
        for r in t.records.iter().filter(|r| r.section == "coefficients") {
            if let Some(p) = r.p_value {
                let want = stars_for(p);
                let got = r.display.len() - r.display.trim_end_matches('*').len();
                if got != want.len() {
                    return Err(format!("{} {} {}: `{}` with p={p}", t.key, r.reporter, r.row, r.display));
                }
            }
        }
    }
    let cd = report.cd_table.as_ref().ok_or("no CD table")?;
    let ur = report.unitroot_table.as_ref().ok_or("no unit-root table")?;
    if cd.notes.len() != 3 || ur.notes.len() != 5 {
        return Err(format!("notes: CD {}, unit roots {}", cd.notes.len(), ur.notes.len()));
    }
    Ok(format!("{} files byte-identical across runs; golden layout matches; 4 tables x 12 columns", names.len()))
}

/// FE on every bundled reporter and relation drops exactly the regressors
/// that are constant within every partner.
pub fn fe_on_bundled_excludes_time_invariant() -> bool {
    let cfg = bundled_config();
    let prepared = prepare_panels(&cfg).expect("bundled panels");
    let opts = DatasetOptions {
        growth_units: cfg.growth_units,
        cee_set: cfg.cee.clone(),
    };
    for p in &prepared {
        for rel in Relation::ALL {
            let m = build_dataset(&p.panel, rel, &opts).unwrap().design_matrix().unwrap();
            let invariant: Vec<String> = (0..m.n_cols())
                .filter(|&j| {
                    m.groups().iter().all(|g| {
                        let col = m.x().view((g.start, j), (g.len(), 1));
                        let first = col[(0, 0)];
                        col.iter().all(|v| (v - first).abs() <= 1e-12 * first.abs().max(1.0))
                    })
                })
                .map(|j| m.names()[j].clone())
                .filter(|n| n != "c")
                .collect();
            let fe = fixed_effects(&m, false).unwrap();
            let mut dropped = fe.dropped.clone();
            dropped.retain(|n| n != "c");
            let mut want = invariant.clone();
            want.sort();
            dropped.sort();
            let expected = ["dist".to_string(), "dummy".to_string()];
            if dropped != want || want != expected || fe.names.iter().any(|n| expected.contains(n)) {
                return false;
            }
        }
    }
    true
}
