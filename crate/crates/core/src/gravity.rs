//! Gravity regressors for one trade/FDI relationship.
//!
//! Every variable enters in natural logs. The per-capita pair terms are named
//! `gdpcav` / `gdpcdif`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{log_transform, BilateralPanel, RawVariable};
use crate::panel::{DesignMatrix, PanelIndex, PanelSeries};

/// Names of the time-varying controls, in table order.
pub const CONTROL_NAMES: [&str; 7] = ["gdpav", "gdpdif", "gdpcav", "gdpcdif", "gdpg", "popav", "bexr"];
/// Names of the time-invariant regressors.
pub const TIME_INVARIANT_NAMES: [&str; 2] = ["dist", "dummy"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TradeFlow {
    Exports,
    Imports,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FdiDirection {
    Outward,
    Inward,
}

/// One of the four trade/FDI relationships.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    pub trade: TradeFlow,
    pub fdi: FdiDirection,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::new(TradeFlow::Exports, FdiDirection::Outward),
        Relation::new(TradeFlow::Exports, FdiDirection::Inward),
        Relation::new(TradeFlow::Imports, FdiDirection::Outward),
        Relation::new(TradeFlow::Imports, FdiDirection::Inward),
    ];

    pub const fn new(trade: TradeFlow, fdi: FdiDirection) -> Self {
        Self { trade, fdi }
    }

    pub fn y_name(self) -> &'static str {
        match self.trade {
            TradeFlow::Exports => "exports",
            TradeFlow::Imports => "imports",
        }
    }

    pub fn fdi_name(self) -> &'static str {
        match self.fdi {
            FdiDirection::Outward => "outfdi",
            FdiDirection::Inward => "infdi",
        }
    }

    /// `exports_outfdi` style key used in configs and file names.
    pub fn key(self) -> String {
        format!("{}_{}", self.y_name(), self.fdi_name())
    }

    pub fn title(self) -> String {
        let t = match self.trade {
            TradeFlow::Exports => "Exports",
            TradeFlow::Imports => "Imports",
        };
        let f = match self.fdi {
            FdiDirection::Outward => "outward FDI",
            FdiDirection::Inward => "inward FDI",
        };
        format!("{t} - {f}")
    }

    pub(crate) fn trade_var(self) -> RawVariable {
        match self.trade {
            TradeFlow::Exports => RawVariable::Exports,
            TradeFlow::Imports => RawVariable::Imports,
        }
    }

    pub(crate) fn fdi_var(self) -> RawVariable {
        match self.fdi {
            FdiDirection::Outward => RawVariable::OutFdi,
            FdiDirection::Inward => RawVariable::InFdi,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' ', '/'], "_");
        Relation::ALL
            .into_iter()
            .find(|r| r.key() == norm)
            .ok_or_else(|| Error::Config(format!("unknown relationship `{s}`")))
    }
}

/// Unit convention of the partner growth rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrowthUnits {
    /// Growth quoted in percentage points (3.5 means 3.5%): `ln(10 + g)`.
    #[default]
    PercentagePoints,
    /// Growth quoted as a fraction (0.035): `ln(0.10 + g)`.
    Fraction,
}

impl GrowthUnits {
    fn shift(self) -> f64 {
        match self {
            GrowthUnits::PercentagePoints => 10.0,
            GrowthUnits::Fraction => 0.10,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DatasetOptions {
    pub growth_units: GrowthUnits,
    /// Partners coded 1 in the dummy. Taken from the `cee_partner` column
    /// when absent.
    pub cee_set: Option<Vec<String>>,
}

/// Regression-ready data for one relationship.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityDataset {
    pub index: PanelIndex,
    pub relation: Relation,
    /// Log trade flow.
    pub y: PanelSeries,
    /// Log FDI stock.
    pub fdi: PanelSeries,
    /// Time-varying controls named as in [`CONTROL_NAMES`].
    pub controls: Vec<PanelSeries>,
    /// Log distance, constant within entity.
    pub dist: PanelSeries,
    /// Partner-group dummy, constant within entity.
    pub dummy: PanelSeries,
}

impl GravityDataset {
    /// Regressor names in table order: fdi, controls, dist, dummy.
    pub fn regressor_names(&self) -> Vec<String> {
        let mut names = vec![self.relation.fdi_name().to_string()];
        names.extend(CONTROL_NAMES.iter().map(|s| s.to_string()));
        names.extend(TIME_INVARIANT_NAMES.iter().map(|s| s.to_string()));
        names
    }

    pub fn regressors(&self) -> Vec<&PanelSeries> {
        let mut cols = vec![&self.fdi];
        cols.extend(self.controls.iter());
        cols.push(&self.dist);
        cols.push(&self.dummy);
        cols
    }

    pub fn control(&self, name: &str) -> Option<&PanelSeries> {
        self.controls.iter().find(|c| c.name() == name)
    }

    /// Stacked design with every regressor (no constant column).
    pub fn design_matrix(&self) -> Result<DesignMatrix> {
        DesignMatrix::from_series(&self.y, &self.regressors())
    }
}

/// `ln((a + b) / 2)` cell by cell.
pub fn avg_pair(a: &PanelSeries, b: &PanelSeries, name: &str) -> Result<PanelSeries> {
    let index = a.index().clone();
    a.try_zip(b, name, |x, y, i, t| {
        check_positive(a, x, &index, i, t)?;
        check_positive(b, y, &index, i, t)?;
        Ok(((x + y) / 2.0).ln())
    })
}

/// `ln(|a - b|)` cell by cell; exact ties are an error.
pub fn abs_diff(a: &PanelSeries, b: &PanelSeries, name: &str) -> Result<PanelSeries> {
    let index = a.index().clone();
    a.try_zip(b, name, |x, y, i, t| {
        check_positive(a, x, &index, i, t)?;
        check_positive(b, y, &index, i, t)?;
        let d = (x - y).abs();
        if d == 0.0 {
            return Err(Error::NonPositive {
                variable: format!("|{} - {}|", a.name(), b.name()),
                cell: index.cell(i, t),
                value: 0.0,
            });
        }
        Ok(d.ln())
    })
}

/// `ln(shift + g)` with the shift of 10 percentage points (or 0.10).
pub fn shifted_log_growth(g: &PanelSeries, units: GrowthUnits, name: &str) -> Result<PanelSeries> {
    let index = g.index().clone();
    let shift = units.shift();
    g.try_map(name, |v, i, t| {
        let shifted = shift + v;
        if shifted <= 0.0 {
            Err(Error::NonPositive {
                variable: name.to_string(),
                cell: index.cell(i, t),
                value: shifted,
            })
        } else {
            Ok(shifted.ln())
        }
    })
}

/// 1 for partners in `cee_set`, 0 otherwise, per entity.
pub fn partner_dummy(partners: &[String], cee_set: &[String]) -> Vec<f64> {
    partners
        .iter()
        .map(|p| if cee_set.contains(p) { 1.0 } else { 0.0 })
        .collect()
}

fn check_positive(s: &PanelSeries, v: f64, index: &PanelIndex, i: usize, t: usize) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive {
            variable: s.name().to_string(),
            cell: index.cell(i, t),
            value: v,
        })
    }
}

/// Builds the regressor set of `relation` from a repaired panel.
pub fn build_dataset(panel: &BilateralPanel, relation: Relation, opts: &DatasetOptions) -> Result<GravityDataset> {
    for var in RawVariable::ALL {
        let s = panel.get(var);
        if !s.is_complete() {
            return Err(Error::Panel(format!(
                "series `{var}` of reporter `{}` has {} missing cells",
                panel.reporter(),
                s.missing_count()
            )));
        }
    }
    let index = panel.index().clone();
    let g = |v| panel.get(v);

    let y = log_transform(g(relation.trade_var()))?.renamed(relation.y_name());
    let fdi = log_transform(g(relation.fdi_var()))?.renamed(relation.fdi_name());
    let controls = vec![
        avg_pair(g(RawVariable::GdpReporter), g(RawVariable::GdpPartner), "gdpav")?,
        abs_diff(g(RawVariable::GdpReporter), g(RawVariable::GdpPartner), "gdpdif")?,
        avg_pair(g(RawVariable::GdppcReporter), g(RawVariable::GdppcPartner), "gdpcav")?,
        abs_diff(g(RawVariable::GdppcReporter), g(RawVariable::GdppcPartner), "gdpcdif")?,
        shifted_log_growth(g(RawVariable::GrowthPartner), opts.growth_units, "gdpg")?,
        avg_pair(g(RawVariable::PopReporter), g(RawVariable::PopPartner), "popav")?,
        log_transform(g(RawVariable::Bexr))?.renamed("bexr"),
    ];

    let dist_raw = g(RawVariable::Dist);
    for i in 0..index.n_entities() {
        let vals = dist_raw.entity_values(i);
        if vals.iter().any(|v| *v != vals[0]) {
            return Err(Error::Panel(format!(
                "dist not constant over time for partner `{}`",
                index.entities()[i]
            )));
        }
    }
    let dist = log_transform(dist_raw)?.renamed("dist");

    let dummy_by_entity = match &opts.cee_set {
        Some(set) => partner_dummy(index.entities(), set),
        None => {
            let cee = g(RawVariable::CeePartner);
            (0..index.n_entities()).map(|i| cee.get(i, 0).unwrap_or(0.0)).collect()
        }
    };
    let dummy = PanelSeries::from_fn("dummy", index.clone(), |i, _| Some(dummy_by_entity[i]))?;

    Ok(GravityDataset {
        index,
        relation,
        y,
        fdi,
        controls,
        dist,
        dummy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(vals: &[f64]) -> PanelSeries {
        let idx = PanelIndex::new(vec!["A".into(), "B".into()], 2000, vals.len() / 2).unwrap();
        PanelSeries::from_complete("s", idx, vals).unwrap()
    }

    #[test]
    fn avg_pair_values() {
        let a = series(&[2.0, 5.0, 7.0, 1.0, 1.0, 1.0]);
        let b = series(&[4.0, 5.0, 7.0, 1.0, 1.0, 1.0]);
        let out = avg_pair(&a, &b, "avg").unwrap();
        assert!((out.get(0, 0).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(out.get(0, 1).unwrap(), 5f64.ln());
    }

    #[test]
    fn abs_diff_symmetric_and_rejects_ties() {
        let a = series(&[10.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = series(&[2.0, 10.0, 1.0, 1.0, 1.0, 1.0]);
        let ab = abs_diff(&a, &b, "d").unwrap();
        let ba = abs_diff(&b, &a, "d").unwrap();
        assert_eq!(ab.get(0, 0), Some(8f64.ln()));
        assert_eq!(ab.get(0, 1), Some(8f64.ln()));
        assert_eq!(ab, ba);
        let tie = series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(matches!(abs_diff(&tie, &tie, "d"), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn growth_shift_boundaries() {
        let g = series(&[-9.0, 0.0, 3.5, 1.0, 1.0, 1.0]);
        let out = shifted_log_growth(&g, GrowthUnits::PercentagePoints, "gdpg").unwrap();
        assert_eq!(out.get(0, 0), Some(0.0));
        assert_eq!(out.get(0, 1), Some(10f64.ln()));
        let bad = series(&[-10.0, 0.0, 3.5, 1.0, 1.0, 1.0]);
        assert!(shifted_log_growth(&bad, GrowthUnits::PercentagePoints, "gdpg").is_err());
        let frac = series(&[-0.09, 0.0, 0.035, 0.0, 0.0, 0.0]);
        let out = shifted_log_growth(&frac, GrowthUnits::Fraction, "gdpg").unwrap();
        assert!((out.get(0, 0).unwrap() - 0.01f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dummy_coding() {
        let partners: Vec<String> = ["HU", "PL", "AT", "DE"].iter().map(|s| s.to_string()).collect();
        let cee: Vec<String> = vec!["HU".into(), "PL".into()];
        assert_eq!(partner_dummy(&partners, &cee), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(partner_dummy(&partners, &[]), vec![0.0; 4]);
    }

    #[test]
    fn relation_keys_parse() {
        for r in Relation::ALL {
            assert_eq!(r.key().parse::<Relation>().unwrap(), r);
        }
        assert!("exports_gdp".parse::<Relation>().is_err());
    }
}
