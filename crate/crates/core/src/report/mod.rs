//! Pipeline driver and report generator.
//!
//! Stage order per reporter: ingest and repair, cross-sectional dependence
//! tests, panel unit-root tests, FE/RE with the Hausman test, then 2SLS with
//! its diagnostics. Each reporter becomes a column group in every table.
//! Reports are pure functions of the input bytes, the config and the seed.

pub mod config;
pub mod shares;
pub mod tables;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{
    fixed_effects, hausman_recommendation, hausman_test_at, ols, random_effects_with, EstimationResult, IvSpec,
    CONSTANT,
};
use crate::gravity::{build_dataset, DatasetOptions, GravityDataset, Relation, CONTROL_NAMES, TIME_INVARIANT_NAMES};
use crate::ingest::{load_panel, BilateralPanel, Repair, SchemaConfig};
use crate::ivdiag::{iv_with_diagnostics_using, IvRun, OverIdTest};
use crate::montecarlo::re_options;
use crate::panel::PanelSeries;
use crate::stats::TestResult;
use crate::unitroot::{cadf_rows, ips_rows, AdfSpec, Deterministic, SimulationOptions, UnitRootResult};
use crate::xsdep::{friedman_cd, frees_cd_with, pesaran_cd, ResidualPanel, FREES_SIM_REPS};

pub use config::{McConfig, PipelineConfig, ResidualSource, RobustMode, UNIT_ROOT_VARIABLES};
pub use shares::{describe_shares, load_totals, ShareBlock, TotalsRecord};
pub use tables::{format_coef, format_stars, Record, Table, TableRow};

use tables::{format_fixed, format_test};

/// Row labels of the cross-sectional dependence table.
pub const CD_ROWS: [&str; 3] = [
    "Pearson CD Normal (Pesaran, 2004)",
    "Friedman Chi-square (Friedman, 1937)",
    "Frees Normal (Frees, 1995)",
];

/// Diagnostic rows of every regression table, after the coefficients.
pub const DIAGNOSTIC_ROWS: [&str; 6] = [
    "Hausman test (recommended)",
    "Pagan-Hall test",
    "Wu-Hausman test",
    "Durbin-Wu-Hausman test",
    "Sargan test / Hansen J test",
    "Observations",
];

/// Instrumented regressors besides the FDI stock; each uses its first lag.
pub const IV_EXTRA_ENDOGENOUS: [&str; 2] = ["gdpg", "bexr"];

/// One reporter's repaired panel.
#[derive(Debug, Clone)]
pub struct PreparedPanel {
    pub panel: BilateralPanel,
    pub repairs: Vec<Repair>,
}

#[derive(Debug, Clone)]
pub struct CdResults {
    pub relation: Relation,
    pub pesaran: TestResult,
    pub friedman: TestResult,
    pub frees: TestResult,
}

#[derive(Debug, Clone)]
pub struct UnitRootRow {
    pub variable: String,
    pub cadf: UnitRootResult,
    pub ips: UnitRootResult,
}

#[derive(Debug, Clone)]
pub struct RegressionRun {
    pub relation: Relation,
    pub fe: EstimationResult,
    pub re: EstimationResult,
    pub hausman: TestResult,
    pub iv: IvRun,
}

#[derive(Debug, Clone)]
pub struct ReporterRun {
    pub reporter: String,
    pub prepared: PreparedPanel,
    pub cd: Vec<CdResults>,
    pub unit_roots: Vec<UnitRootRow>,
    pub regressions: Vec<RegressionRun>,
    pub shares: Option<ShareBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub version: String,
    pub config_sha256: String,
    pub input_sha256: String,
    pub totals_sha256: Option<String>,
    pub seed: u64,
    /// Distinct provenance labels of simulated or tabulated reference values.
    pub references: Vec<String>,
}

impl Provenance {
    pub fn footer(&self) -> String {
        let mut s = format!(
            "gravpanel {}; config sha256 {}; input sha256 {}",
            self.version, self.config_sha256, self.input_sha256
        );
        if let Some(t) = &self.totals_sha256 {
            s += &format!("; totals sha256 {t}");
        }
        s += &format!("; seed {}", self.seed);
        s
    }
}

/// Which stages [`run_stages`] executes. Ingest always runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub cd: bool,
    pub unit_roots: bool,
    pub estimation: bool,
    pub shares: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        cd: true,
        unit_roots: true,
        estimation: true,
        shares: true,
    };
    pub const NONE: Stages = Stages {
        cd: false,
        unit_roots: false,
        estimation: false,
        shares: false,
    };
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub runs: Vec<ReporterRun>,
    pub cd_table: Option<Table>,
    pub unitroot_table: Option<Table>,
    pub regression_tables: Vec<Table>,
    pub shares: Vec<ShareBlock>,
    /// Estimation notes and warnings collected across stages.
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads the input, keeps the configured reporters and partners, and
/// repairs interior gaps.
pub fn prepare_panels(cfg: &PipelineConfig) -> Result<Vec<PreparedPanel>> {
    cfg.validate()?;
    let schema = SchemaConfig { years: cfg.years };
    let panels = load_panel(&cfg.input, &schema)?;
    let selected: Vec<BilateralPanel> = if cfg.reporters.is_empty() {
        panels
    } else {
        cfg.reporters
            .iter()
            .map(|r| {
                panels
                    .iter()
                    .find(|p| p.reporter() == r)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("reporter `{r}` not found in {}", cfg.input.display())))
            })
            .collect::<Result<_>>()?
    };
    if selected.is_empty() {
        return Err(Error::Panel("input holds no reporters".into()));
    }
    selected
        .into_iter()
        .map(|p| {
            let p = match &cfg.partners {
                Some(all) => {
                    let own: Vec<String> = all.iter().filter(|x| x.as_str() != p.reporter()).cloned().collect();
                    p.select_partners(&own)?
                }
                None => p,
            };
            if p.index().n_entities() < 2 {
                return Err(Error::Panel(format!("reporter `{}` has fewer than 2 partners", p.reporter())));
            }
            let (panel, repairs) = p.repair(cfg.max_gap)?;
            Ok(PreparedPanel { panel, repairs })
        })
        .collect()
}

fn dataset(p: &PreparedPanel, relation: Relation, cfg: &PipelineConfig) -> Result<GravityDataset> {
    if !p.panel.is_complete() {
        let open: Vec<String> = p
            .repairs
            .iter()
            .filter(|r| !r.is_fill())
            .take(3)
            .map(|r| format!("{} at {}: {}", r.variable, r.cell, r.action))
            .collect();
        return Err(Error::Panel(format!(
            "reporter `{}` has unrepaired gaps ({})",
            p.panel.reporter(),
            open.join("; ")
        )));
    }
    let opts = DatasetOptions {
        growth_units: cfg.growth_units,
        cee_set: cfg.cee.clone(),
    };
    build_dataset(&p.panel, relation, &opts)
}

fn cd_stage(p: &PreparedPanel, relation: Relation, cfg: &PipelineConfig) -> Result<CdResults> {
    let ds = dataset(p, relation, cfg)?;
    let m = ds.design_matrix()?;
    let resid = match cfg.cd_residuals {
        ResidualSource::FixedEffects => fixed_effects(&m, false)?.residuals,
        ResidualSource::PooledOls => ols(&m, false)?.residuals,
    };
    let r = ResidualPanel::from_design(&m, resid.as_slice())?;
    Ok(CdResults {
        relation,
        pesaran: pesaran_cd(&r)?,
        friedman: friedman_cd(&r)?,
        frees: frees_cd_with(&r, cfg.seed, FREES_SIM_REPS)?,
    })
}

fn entity_rows(s: &PanelSeries) -> Vec<Vec<f64>> {
    (0..s.index().n_entities())
        .map(|i| s.entity_values(i).iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect()
}

/// Log series of the unit-root table, keyed as in [`UNIT_ROOT_VARIABLES`].
fn unit_root_series(p: &PreparedPanel, cfg: &PipelineConfig) -> Result<Vec<(String, PanelSeries)>> {
    let eo = dataset(p, Relation::ALL[0], cfg)?;
    let ii = dataset(p, Relation::ALL[3], cfg)?;
    let mut out = vec![
        ("ex".to_string(), eo.y.clone()),
        ("im".to_string(), ii.y.clone()),
        ("outfdi".to_string(), eo.fdi.clone()),
        ("infdi".to_string(), ii.fdi.clone()),
    ];
    for name in CONTROL_NAMES {
        let s = eo.control(name).expect("control present").clone();
        out.push((name.to_string(), s));
    }
    Ok(out)
}

fn unit_root_stage(p: &PreparedPanel, cfg: &PipelineConfig) -> Result<Vec<UnitRootRow>> {
    let sim = SimulationOptions {
        seed: cfg.seed,
        ..Default::default()
    };
    let reporter = p.panel.reporter();
    unit_root_series(p, cfg)?
        .into_par_iter()
        .map(|(name, s)| {
            let det = if cfg.has_trend(reporter, &name) {
                Deterministic::Trend
            } else {
                Deterministic::Constant
            };
            let spec = AdfSpec::new(det, cfg.adf_lags);
            let rows = entity_rows(&s);
            let cadf = cadf_rows(&rows, spec, &sim).map_err(|e| e.in_stage(&format!("CADF {name}")))?;
            let ips = ips_rows(&rows, spec, &sim).map_err(|e| e.in_stage(&format!("IPS {name}")))?;
            Ok(UnitRootRow { variable: name, cadf, ips })
        })
        .collect()
}

/// The IV specification of the gravity equation for `relation`.
pub fn gravity_iv_spec(relation: Relation) -> IvSpec {
    let mut endog = vec![relation.fdi_name()];
    endog.extend(IV_EXTRA_ENDOGENOUS);
    IvSpec::first_lags(&endog)
}

fn estimation_stage(p: &PreparedPanel, relation: Relation, cfg: &PipelineConfig) -> Result<RegressionRun> {
    let ds = dataset(p, relation, cfg)?;
    let m = ds.design_matrix()?;
    let fe = fixed_effects(&m, false).map_err(|e| e.in_stage("FE"))?;
    let re = random_effects_with(&m, &re_options()).map_err(|e| e.in_stage("RE"))?;
    let hausman = hausman_test_at(&fe, &re, cfg.hausman_alpha).map_err(|e| e.in_stage("Hausman"))?;
    let iv = iv_with_diagnostics_using(
        &m,
        &gravity_iv_spec(relation),
        cfg.alpha,
        cfg.robust.force(),
        cfg.pagan_hall_indicators,
    )
    .map_err(|e| e.in_stage("2SLS"))?;
    Ok(RegressionRun {
        relation,
        fe,
        re,
        hausman,
        iv,
    })
}

fn run_reporter(
    p: PreparedPanel,
    cfg: &PipelineConfig,
    stages: Stages,
    totals: Option<&[TotalsRecord]>,
) -> Result<ReporterRun> {
    let reporter = p.panel.reporter().to_string();
    let ctx = |stage: &str, rel: Option<Relation>| match rel {
        Some(r) => format!("{stage} [{reporter} {r}]"),
        None => format!("{stage} [{reporter}]"),
    };
    let cd = if stages.cd {
        cfg.relations
            .par_iter()
            .map(|&r| cd_stage(&p, r, cfg).map_err(|e| e.in_stage(&ctx("cross-sectional dependence tests", Some(r)))))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let unit_roots = if stages.unit_roots {
        unit_root_stage(&p, cfg).map_err(|e| e.in_stage(&ctx("unit-root tests", None)))?
    } else {
        Vec::new()
    };
    let regressions = if stages.estimation {
        cfg.relations
            .par_iter()
            .map(|&r| estimation_stage(&p, r, cfg).map_err(|e| e.in_stage(&ctx("estimation", Some(r)))))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let shares = match (stages.shares, totals) {
        (true, Some(t)) => Some(describe_shares(&p.panel, t)),
        _ => None,
    };
    Ok(ReporterRun {
        reporter,
        prepared: p,
        cd,
        unit_roots,
        regressions,
        shares,
    })
}

/// Every stage for every configured reporter and relationship.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    run_stages(cfg, Stages::ALL)
}

pub fn run_stages(cfg: &PipelineConfig, stages: Stages) -> Result<PipelineReport> {
    let input_bytes = std::fs::read(&cfg.input)
        .map_err(|e| Error::Config(format!("cannot read input {}: {e}", cfg.input.display())))?;
    let prepared = prepare_panels(cfg).map_err(|e| e.in_stage("ingest"))?;
    let (totals, totals_sha256) = match (&cfg.totals, stages.shares) {
        (Some(path), true) => {
            let bytes = std::fs::read(path)
                .map_err(|e| Error::Config(format!("cannot read totals {}: {e}", path.display())))?;
            (Some(shares::read_totals(bytes.as_slice())?), Some(sha256_hex(&bytes)))
        }
        _ => (None, None),
    };
    let runs = prepared
        .into_iter()
        .map(|p| run_reporter(p, cfg, stages, totals.as_deref()))
        .collect::<Result<Vec<_>>>()?;

    let mut notes = Vec::new();
    let mut references = BTreeSet::new();
    for run in &runs {
        let fills = run.prepared.repairs.iter().filter(|r| r.is_fill()).count();
        if fills > 0 {
            notes.push(format!("{}: {fills} cell(s) filled by linear interpolation", run.reporter));
        }
        for c in &run.cd {
            references.extend(c.frees.notes.iter().cloned());
        }
        for u in &run.unit_roots {
            references.insert(u.cadf.provenance.clone());
            references.insert(u.ips.provenance.clone());
        }
        for r in &run.regressions {
            let tag = format!("{} {}", run.reporter, r.relation);
            for (label, list) in [
                ("FE", &r.fe.notes),
                ("RE", &r.re.notes),
                ("Hausman", &r.hausman.notes),
                ("2SLS", &r.iv.estimate.notes),
                ("IV diagnostics", &r.iv.diagnostics.notes),
                ("Wu-Hausman", &r.iv.diagnostics.wu_hausman.notes),
                ("over-identification", &r.iv.diagnostics.overid.notes),
            ] {
                for n in list {
                    notes.push(format!("{tag} {label}: {n}"));
                }
            }
            if let Some(iv) = &r.iv.estimate.iv {
                notes.push(format!("{tag} 2SLS: {} rows dropped for lagged instruments", iv.rows_dropped));
            }
        }
        if let Some(s) = &run.shares {
            notes.extend(s.warnings.iter().cloned());
        }
    }

    let cd_table = stages.cd.then(|| build_cd_table(&runs));
    let unitroot_table = stages.unit_roots.then(|| build_unit_root_table(&runs, cfg));
    let regression_tables = if stages.estimation {
        cfg.relations
            .iter()
            .enumerate()
            .map(|(k, &rel)| build_regression_table(&runs, rel, k))
            .collect()
    } else {
        Vec::new()
    };
    let shares = runs.iter().filter_map(|r| r.shares.clone()).collect();
    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(cfg.canonical().as_bytes()),
        input_sha256: sha256_hex(&input_bytes),
        totals_sha256,
        seed: cfg.seed,
        references: references.into_iter().collect(),
    };
    Ok(PipelineReport {
        config: cfg.clone(),
        runs,
        cd_table,
        unitroot_table,
        regression_tables,
        shares,
        notes,
        provenance,
    })
}

fn record(section: &str, row: &str, reporter: &str, column: &str, display: String) -> Record {
    Record {
        section: section.to_string(),
        row: row.to_string(),
        reporter: reporter.to_string(),
        column: column.to_string(),
        value: None,
        se: None,
        p_value: None,
        display,
    }
}

fn build_cd_table(runs: &[ReporterRun]) -> Table {
    let columns: Vec<String> = runs.iter().map(|r| r.reporter.clone()).collect();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let relations: Vec<Relation> = runs.first().map(|r| r.cd.iter().map(|c| c.relation).collect()).unwrap_or_default();
    for (k, rel) in relations.iter().enumerate() {
        rows.push(TableRow::Section(rel.title()));
        for (j, label) in CD_ROWS.iter().enumerate() {
            let mut cells = Vec::new();
            for run in runs {
                let c = &run.cd[k];
                let t = [&c.pesaran, &c.friedman, &c.frees][j];
                let display = match j {
                    0 => format_test(t.statistic, t.p_value, 3, 3),
                    1 => format_test(t.statistic, t.p_value, 2, 3),
                    _ => format_fixed(t.statistic, 3),
                };
                records.push(Record {
                    value: Some(t.statistic),
                    p_value: t.p_value,
                    ..record(&rel.key(), label, &run.reporter, "statistic", display.clone())
                });
                cells.push(display);
            }
            rows.push(TableRow::Data {
                label: label.to_string(),
                cells,
            });
        }
    }
    let cv = runs
        .first()
        .and_then(|r| r.cd.first())
        .and_then(|c| c.frees.critical_values.clone())
        .unwrap_or_default();
    let cv_text = match cv.as_slice() {
        [a, b, c] => format!(
            "{} (10%), {} (5%) and {} (1%)",
            format_fixed(a.value, 3),
            format_fixed(b.value, 3),
            format_fixed(c.value, 3)
        ),
        _ => "not available".into(),
    };
    Table {
        key: "cd_tests".into(),
        title: "Table 1. Cross-sectional dependence tests".into(),
        stub: "Tests".into(),
        columns,
        rows,
        notes: vec![
            "The null hypothesis for each test is cross-sectional independence".into(),
            "Test statistics are reported (p-values in brackets)".into(),
            format!("The critical values for Frees' Q distribution are {cv_text}"),
        ],
        records,
    }
}

fn build_unit_root_table(runs: &[ReporterRun], cfg: &PipelineConfig) -> Table {
    let mut columns = Vec::new();
    for run in runs {
        columns.push(format!("{} CADF test", run.reporter));
        columns.push(format!("{} IPS test", run.reporter));
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (k, var) in UNIT_ROOT_VARIABLES.iter().enumerate() {
        let mut cells = Vec::new();
        for run in runs {
            let Some(row) = run.unit_roots.get(k) else { continue };
            for (name, res) in [("CADF test", &row.cadf), ("IPS test", &row.ips)] {
                let trend = if res.spec.deterministic == Deterministic::Trend { " ^t" } else { "" };
                let p = res.p_value.map(|p| format!(" ({})", format_fixed(p, 2))).unwrap_or_default();
                let display = format!("{}{trend}{p}", format_fixed(res.tbar, 3));
                records.push(Record {
                    value: Some(res.tbar),
                    se: None,
                    p_value: res.p_value,
                    ..record(&res.spec.deterministic.to_string(), var, &run.reporter, name, display.clone())
                });
                cells.push(display);
            }
        }
        rows.push(TableRow::Data {
            label: format!("*{var}*"),
            cells,
        });
    }
    Table {
        key: "unit_roots".into(),
        title: "Table 2. Panel unit root tests".into(),
        stub: "Variables".into(),
        columns,
        rows,
        notes: vec![
            "The null hypothesis for both tests is the presence of a panel unit root".into(),
            "The cross-sectional ADF (CADF) test allows for cross-sectional dependence, while the IPS test assumes cross-sectional independence".into(),
            "t-bar is reported and the p-values are in brackets".into(),
            format!("{} lags are used in the CADF and IPS regressions", cfg.adf_lags),
            "^t marks a test performed with a trend (otherwise the constant is used)".into(),
        ],
        records,
    }
}

/// Coefficient rows of a regression table, in display order.
pub fn coefficient_rows(relation: Relation) -> Vec<String> {
    let mut rows = vec![CONSTANT.to_string(), relation.fdi_name().to_string()];
    rows.extend(CONTROL_NAMES.iter().map(|s| s.to_string()));
    rows.extend(TIME_INVARIANT_NAMES.iter().map(|s| s.to_string()));
    rows
}

fn coefficient_cell(est: &EstimationResult, name: &str) -> (String, Option<(f64, f64, f64)>) {
    match est.coef(name) {
        Some(c) if c.estimate.is_finite() => {
            let stars = if c.p.is_finite() { format_stars(c.p) } else { "" };
            (format!("{}{stars}", format_coef(c.estimate)), Some((c.estimate, c.se, c.p)))
        }
        _ => ("-".into(), None),
    }
}

fn iv_column_label(run: &RegressionRun) -> &'static str {
    if run.iv.diagnostics.robust {
        "2SLS ^r"
    } else {
        "2SLS"
    }
}

fn build_regression_table(runs: &[ReporterRun], relation: Relation, k: usize) -> Table {
    let regs: Vec<(&str, &RegressionRun)> = runs
        .iter()
        .map(|r| {
            let reg = r.regressions.iter().find(|x| x.relation == relation).expect("relation estimated");
            (r.reporter.as_str(), reg)
        })
        .collect();
    let mut columns = Vec::new();
    for (rep, reg) in &regs {
        columns.push(format!("{rep} FE"));
        columns.push(format!("{rep} RE"));
        columns.push(format!("{rep} {}", iv_column_label(reg)));
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for name in coefficient_rows(relation) {
        let mut cells = Vec::new();
        for (rep, reg) in &regs {
            for (col, est) in [("FE", &reg.fe), ("RE", &reg.re), (iv_column_label(reg), &reg.iv.estimate)] {
                let (display, nums) = coefficient_cell(est, &name);
                records.push(Record {
                    value: nums.map(|n| n.0),
                    se: nums.map(|n| n.1),
                    p_value: nums.map(|n| n.2),
                    ..record("coefficients", &name, rep, col, display.clone())
                });
                cells.push(display);
            }
        }
        rows.push(TableRow::Data {
            label: format!("*{name}*"),
            cells,
        });
    }
    for label in DIAGNOSTIC_ROWS {
        let mut cells = Vec::new();
        for (rep, reg) in &regs {
            let d = &reg.iv.diagnostics;
            let spanning = |t: &TestResult| (format_test(t.statistic, t.p_value, 2, 2), Some(t.statistic), t.p_value);
            let group: Vec<(String, String, Option<f64>, Option<f64>)> = match label {
                "Hausman test (recommended)" => {
                    let p = reg.hausman.p_value.unwrap_or(f64::NAN);
                    let rec = reg
                        .hausman
                        .annotation
                        .clone()
                        .unwrap_or_else(|| hausman_recommendation(p, 0.05).to_string());
                    let text = format!("P > χ² = {} ({rec})", format_fixed(p, 2));
                    vec![("all".into(), text, Some(reg.hausman.statistic), reg.hausman.p_value)]
                }
                "Pagan-Hall test" => {
                    let (t, v, p) = spanning(&d.pagan_hall);
                    vec![("all".into(), t, v, p)]
                }
                "Wu-Hausman test" => {
                    let (t, v, p) = spanning(&d.wu_hausman);
                    vec![("all".into(), t, v, p)]
                }
                "Durbin-Wu-Hausman test" => {
                    let (t, v, p) = spanning(&d.durbin_wu_hausman);
                    vec![("all".into(), t, v, p)]
                }
                "Sargan test / Hansen J test" => {
                    let (t, v, p) = spanning(&d.overid);
                    let col = match d.overid_kind {
                        OverIdTest::Sargan => "Sargan",
                        OverIdTest::HansenJ => "Hansen J",
                    };
                    vec![(col.into(), t, v, p)]
                }
                _ => [("FE", &reg.fe), ("RE", &reg.re), (iv_column_label(reg), &reg.iv.estimate)]
                    .iter()
                    .map(|(c, e)| (c.to_string(), e.n_obs.to_string(), Some(e.n_obs as f64), None))
                    .collect(),
            };
            if group.len() == 1 {
                let (col, text, v, p) = group.into_iter().next().unwrap();
                records.push(Record {
                    value: v,
                    p_value: p,
                    ..record("diagnostics", label, rep, &col, text.clone())
                });
                cells.extend([text, String::new(), String::new()]);
            } else {
                for (col, text, v, p) in group {
                    records.push(Record {
                        value: v,
                        p_value: p,
                        ..record("diagnostics", label, rep, &col, text.clone())
                    });
                    cells.push(text);
                }
            }
        }
        rows.push(TableRow::Data {
            label: label.to_string(),
            cells,
        });
    }
    let fdi = relation.fdi_name();
    let title = match relation.title().split_once(" - ") {
        Some((t, f)) => format!("Table {}. {t} and {f} relationship", 3 + k),
        None => format!("Table {}. {}", 3 + k, relation.title()),
    };
    Table {
        key: format!("reg_{}", relation.key()),
        title,
        stub: format!("*{}*", relation.y_name()),
        columns,
        rows,
        notes: vec![
            "*, **, *** mean significance at 10%, 5% and 1%".into(),
            "p-values are reported in brackets".into(),
            format!("The instruments used for the endogenous variables ({fdi}, gdpg and bexr) are the first lags of these variables"),
            "The Sargan statistic is the over-identification test for all instruments and equals 0.00 if the equation is exactly identified; if the Pagan-Hall test documents heteroskedasticity, the Hansen J statistic is reported instead".into(),
            "2SLS ^r means 2SLS with robust errors, used when the Pagan-Hall test rejects homoskedasticity".into(),
            "Endogeneity is tested with the Wu-Hausman and Durbin-Wu-Hausman tests".into(),
            "The dummy variable takes value 1 for CEE partners, and 0 otherwise".into(),
        ],
        records,
    }
}

fn shares_markdown(blocks: &[ShareBlock]) -> String {
    let mut out = String::from("### Bilateral shares of world totals (%)\n\n");
    out += "| Reporter | Year | exports | imports | outfdi | infdi |\n|---|---|---|---|---|---|\n";
    for b in blocks {
        for r in &b.rows {
            let cells: Vec<String> = r
                .shares
                .iter()
                .map(|s| s.map(|v| format_fixed(v, 2)).unwrap_or_else(|| "NA".into()))
                .collect();
            out += &format!("| {} | {} | {} |\n", b.reporter, r.year, cells.join(" | "));
        }
    }
    out
}

impl PipelineReport {
    pub fn tables(&self) -> Vec<&Table> {
        self.cd_table
            .iter()
            .chain(self.unitroot_table.iter())
            .chain(self.regression_tables.iter())
            .collect()
    }

    pub fn repairs(&self) -> Vec<(&str, &Repair)> {
        self.runs
            .iter()
            .flat_map(|r| r.prepared.repairs.iter().map(move |x| (r.reporter.as_str(), x)))
            .collect()
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Gravity panel report\n\n");
        let reporters: Vec<&str> = self.runs.iter().map(|r| r.reporter.as_str()).collect();
        out += &format!("Reporters: {}.\n\n", reporters.join(", "));
        for run in &self.runs {
            let idx = run.prepared.panel.index();
            let periods = idx.periods();
            out += &format!(
                "- {}: {} partners ({}), {}-{}\n",
                run.reporter,
                idx.n_entities(),
                idx.entities().join(", "),
                periods.first().copied().unwrap_or_default(),
                periods.last().copied().unwrap_or_default()
            );
        }
        out += "\n";
        if !self.shares.is_empty() {
            out += &shares_markdown(&self.shares);
            out += "\n";
        }
        for t in self.tables() {
            out += &t.to_markdown();
            out += "\n";
        }
        if !self.notes.is_empty() {
            out += "### Estimation notes\n\n";
            out += "The FE constant is the grand-mean restored intercept mean(y) - mean(x)'b.\n\n";
            for n in &self.notes {
                out += &format!("- {n}\n");
            }
            out += "\n";
        }
        out += "---\n\n";
        out += &format!("Provenance: {}\n", self.provenance.footer());
        for r in &self.provenance.references {
            out += &format!("\n- {r}");
        }
        out += "\n";
        out
    }

    /// Writes every table CSV plus `report.md`, `shares.csv` (when totals
    /// were given) and `repairs.csv` into `dir`. Returns the written paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in self.tables() {
            let path = dir.join(format!("{}.csv", t.key));
            t.write_csv(std::fs::File::create(&path)?)?;
            written.push(path);
        }
        if !self.shares.is_empty() {
            let path = dir.join("shares.csv");
            shares::write_shares(&self.shares, std::fs::File::create(&path)?)?;
            written.push(path);
        }
        let path = dir.join("repairs.csv");
        write_repairs_csv(&self.repairs(), std::fs::File::create(&path)?)?;
        written.push(path);
        let path = dir.join("report.md");
        std::fs::write(&path, self.to_markdown())?;
        written.push(path);
        Ok(written)
    }
}

/// `reporter,variable,entity,period,action`.
pub fn write_repairs_csv<W: std::io::Write>(repairs: &[(&str, &Repair)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["reporter", "variable", "entity", "period", "action"])?;
    for (rep, r) in repairs {
        w.write_record([
            rep.to_string(),
            r.variable.clone(),
            r.cell.entity.clone(),
            r.cell.period.to_string(),
            r.action.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
