//! Regenerates the bundled synthetic dataset under `data/`.
//!
//! Four reporters (CZ, HU, PL, SK), each with the other three as CEE
//! partners plus AT, DE and NL, 2000-2013. One cell (CZ-DE outfdi 2006) is
//! blanked so the repair step has work to do. World totals are chosen so
//! the bilateral shares double over the range.
//!
//! `cargo run -p gravpanel --example make_synthetic -- crates/core/data`

use std::io::Write;
use std::path::PathBuf;

use gravpanel::dgp::{generate, DgpSpec, EffectMode, Heteroskedasticity};
use gravpanel::ingest::{save_panels, RawVariable};
use gravpanel::report::shares::SHARE_VARIABLES;
use gravpanel::{BilateralPanel, PanelIndex, PanelSeries};

const REPORTERS: [&str; 4] = ["CZ", "HU", "PL", "SK"];
const EU3: [&str; 3] = ["AT", "DE", "NL"];

fn relabel(p: &BilateralPanel, reporter: &str, partners: Vec<String>) -> gravpanel::Result<BilateralPanel> {
    let old = p.index();
    let idx = PanelIndex::from_periods(partners, old.periods().to_vec())?;
    let series = RawVariable::ALL
        .iter()
        .map(|v| {
            let s = p.get(*v);
            PanelSeries::from_fn(v.column(), idx.clone(), |i, t| s.get(i, t))
        })
        .collect::<gravpanel::Result<Vec<_>>>()?;
    BilateralPanel::new(reporter, idx, series)
}

fn main() -> gravpanel::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/data".into()));
    std::fs::create_dir_all(&dir)?;
    let mut panels = Vec::new();
    for (k, rep) in REPORTERS.iter().enumerate() {
        let mut spec = DgpSpec {
            seed: 2000 + k as u64,
            endogeneity: 0.2,
            ..Default::default()
        };
        match *rep {
            "CZ" => spec.effect_mode = EffectMode::Correlated(0.7),
            "HU" => spec.effect_mode = EffectMode::Correlated(0.5),
            "PL" => spec.cross_dependence = 1.0,
            "SK" => spec.heteroskedasticity = Heteroskedasticity::Fdi(2.5),
            _ => {}
        }
        // CEE partners first: the generator flags the first half as CEE.
        let mut partners: Vec<String> = REPORTERS.iter().filter(|r| *r != rep).map(|s| s.to_string()).collect();
        partners.extend(EU3.iter().map(|s| s.to_string()));
        let mut panel = relabel(&generate(&spec)?, rep, partners)?;
        if *rep == "CZ" {
            let s = panel.get(RawVariable::OutFdi).clone();
            let idx = panel.index().clone();
            let de = idx.entity_position("DE").expect("DE partner");
            let y2006 = idx.period_position(2006).expect("2006");
            let holed = PanelSeries::from_fn("outfdi", idx, |i, t| {
                if i == de && t == y2006 { None } else { s.get(i, t) }
            })?;
            panel = panel.with_series(RawVariable::OutFdi, holed)?;
        }
        panels.push(panel);
    }
    save_panels(&panels, dir.join("synthetic_panel.csv"))?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("synthetic_totals.csv"))?);
    writeln!(out, "reporter,year,exports,imports,outfdi,infdi")?;
    for p in &panels {
        let (repaired, _) = p.repair(2)?;
        let idx = repaired.index();
        let t_len = idx.n_periods() as f64 - 1.0;
        for (t, year) in idx.periods().iter().enumerate() {
            let growth = 2f64.powf(t as f64 / t_len);
            let mut cells = Vec::new();
            for (j, var) in SHARE_VARIABLES.iter().enumerate() {
                let base = if j < 2 { 0.04 } else { 0.06 };
                let s = repaired.get(*var);
                let bilateral: f64 = (0..idx.n_entities()).map(|i| s.get(i, t).expect("repaired")).sum();
                cells.push(format!("{}", bilateral / (base * growth)));
            }
            writeln!(out, "{},{year},{}", p.reporter(), cells.join(","))?;
        }
    }
    out.flush()?;
    println!("wrote {}", dir.display());
    Ok(())
}
