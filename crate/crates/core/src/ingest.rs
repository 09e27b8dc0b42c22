//! Long-format bilateral CSV ingestion.
//!
//! One row per `(reporter, partner, year)`. Header names are matched
//! case-insensitively and in any order; extra columns are ignored. Missing
//! numeric cells are written as an empty string or `NA`.
//!
//! The bilateral exchange rate is carried as supplied; the file contract does
//! not say whether it is an annual average or an end-of-period rate.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Cell, Error, Result};
use crate::panel::{PanelIndex, PanelSeries};

pub const KEY_COLUMNS: [&str; 3] = ["reporter", "partner", "year"];

/// Numeric columns of the bilateral record, in canonical file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RawVariable {
    Exports,
    Imports,
    OutFdi,
    InFdi,
    GdpReporter,
    GdpPartner,
    GdppcReporter,
    GdppcPartner,
    GrowthPartner,
    PopReporter,
    PopPartner,
    Bexr,
    Dist,
    CeePartner,
}

impl RawVariable {
    pub const ALL: [RawVariable; 14] = [
        RawVariable::Exports,
        RawVariable::Imports,
        RawVariable::OutFdi,
        RawVariable::InFdi,
        RawVariable::GdpReporter,
        RawVariable::GdpPartner,
        RawVariable::GdppcReporter,
        RawVariable::GdppcPartner,
        RawVariable::GrowthPartner,
        RawVariable::PopReporter,
        RawVariable::PopPartner,
        RawVariable::Bexr,
        RawVariable::Dist,
        RawVariable::CeePartner,
    ];

    pub fn column(self) -> &'static str {
        match self {
            RawVariable::Exports => "exports",
            RawVariable::Imports => "imports",
            RawVariable::OutFdi => "outfdi",
            RawVariable::InFdi => "infdi",
            RawVariable::GdpReporter => "gdp_reporter",
            RawVariable::GdpPartner => "gdp_partner",
            RawVariable::GdppcReporter => "gdppc_reporter",
            RawVariable::GdppcPartner => "gdppc_partner",
            RawVariable::GrowthPartner => "growth_partner",
            RawVariable::PopReporter => "pop_reporter",
            RawVariable::PopPartner => "pop_partner",
            RawVariable::Bexr => "bexr",
            RawVariable::Dist => "dist",
            RawVariable::CeePartner => "cee_partner",
        }
    }

    /// Growth rates may be negative and the CEE flag may be zero; every
    /// other series is a strictly positive level.
    pub fn must_be_positive(self) -> bool {
        !matches!(self, RawVariable::GrowthPartner | RawVariable::CeePartner)
    }

    fn position(self) -> usize {
        Self::ALL.iter().position(|v| *v == self).unwrap()
    }
}

impl fmt::Display for RawVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

/// All raw series of one reporter: partners are the entities, years the periods.
#[derive(Debug, Clone, PartialEq)]
pub struct BilateralPanel {
    reporter: String,
    index: PanelIndex,
    series: Vec<PanelSeries>,
}

impl BilateralPanel {
    /// `series` must hold one entry per [`RawVariable`], in `RawVariable::ALL` order.
    pub fn new(reporter: impl Into<String>, index: PanelIndex, series: Vec<PanelSeries>) -> Result<Self> {
        let reporter = reporter.into();
        if series.len() != RawVariable::ALL.len() {
            return Err(Error::Panel(format!(
                "expected {} series, got {}",
                RawVariable::ALL.len(),
                series.len()
            )));
        }
        for (s, var) in series.iter().zip(RawVariable::ALL) {
            if s.index() != &index {
                return Err(Error::Panel(format!("series `{var}` is on a different index")));
            }
        }
        let panel = Self {
            reporter,
            index,
            series,
        };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        for var in RawVariable::ALL {
            let s = self.get(var);
            if var.must_be_positive() {
                for i in 0..self.index.n_entities() {
                    for t in 0..self.index.n_periods() {
                        if let Some(v) = s.get(i, t) {
                            if v <= 0.0 {
                                return Err(Error::NonPositive {
                                    variable: var.column().to_string(),
                                    cell: self.index.cell(i, t),
                                    value: v,
                                });
                            }
                        }
                    }
                }
            }
        }
        let cee = self.get(RawVariable::CeePartner);
        for i in 0..self.index.n_entities() {
            let vals = cee.entity_values(i);
            let first = vals.iter().flatten().next().copied();
            let Some(first) = first else {
                return Err(Error::Schema(format!(
                    "cee_partner missing for partner `{}`",
                    self.index.entities()[i]
                )));
            };
            if first != 0.0 && first != 1.0 {
                return Err(Error::Schema(format!(
                    "cee_partner must be 0 or 1, got {first} for partner `{}`",
                    self.index.entities()[i]
                )));
            }
            if vals.iter().any(|v| *v != Some(first)) {
                return Err(Error::Schema(format!(
                    "cee_partner not constant over time for ({}, {})",
                    self.reporter,
                    self.index.entities()[i]
                )));
            }
        }
        Ok(())
    }

    pub fn reporter(&self) -> &str {
        &self.reporter
    }

    pub fn index(&self) -> &PanelIndex {
        &self.index
    }

    pub fn get(&self, var: RawVariable) -> &PanelSeries {
        &self.series[var.position()]
    }

    pub fn is_complete(&self) -> bool {
        self.series.iter().all(PanelSeries::is_complete)
    }

    pub fn with_series(&self, var: RawVariable, series: PanelSeries) -> Result<Self> {
        let mut all = self.series.clone();
        all[var.position()] = series;
        Self::new(self.reporter.clone(), self.index.clone(), all)
    }

    /// Keeps `partners` (in the given order) as entities. Every name must be
    /// present in the panel.
    pub fn select_partners(&self, partners: &[String]) -> Result<Self> {
        let pos: Vec<usize> = partners
            .iter()
            .map(|p| {
                self.index.entity_position(p).ok_or_else(|| {
                    Error::Panel(format!("partner `{p}` not found for reporter `{}`", self.reporter))
                })
            })
            .collect::<Result<_>>()?;
        let index = PanelIndex::from_periods(partners.to_vec(), self.index.periods().to_vec())?;
        let series = self
            .series
            .iter()
            .map(|s| PanelSeries::from_fn(s.name(), index.clone(), |i, t| s.get(pos[i], t)))
            .collect::<Result<_>>()?;
        Self::new(self.reporter.clone(), index, series)
    }

    /// Interpolates interior gaps of every series.
    pub fn repair(&self, max_gap: usize) -> Result<(Self, Vec<Repair>)> {
        let mut report = Vec::new();
        let mut series = Vec::with_capacity(self.series.len());
        for s in &self.series {
            let (fixed, rep) = interpolate_gaps(s, max_gap)?;
            report.extend(rep);
            series.push(fixed);
        }
        Ok((Self::new(self.reporter.clone(), self.index.clone(), series)?, report))
    }
}

/// Declared layout of the input file.
#[derive(Debug, Clone, Default)]
pub struct SchemaConfig {
    /// Inclusive year range; derived from the data when absent.
    pub years: Option<(i32, i32)>,
}

/// Loads one [`BilateralPanel`] per reporter, in order of first appearance.
pub fn load_panel(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<Vec<BilateralPanel>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_panels(file, schema)
}

pub fn read_panels<R: Read>(reader: R, schema: &SchemaConfig) -> Result<Vec<BilateralPanel>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::Schema(format!("missing column `{}`", KEY_COLUMNS[0]))),
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let mut col_of: HashMap<&str, usize> = HashMap::new();
    for (j, h) in header.iter().enumerate() {
        if col_of.insert(h.as_str(), j).is_some() {
            return Err(Error::Schema(format!("duplicate column `{h}`")));
        }
    }
    let required: Vec<&str> = KEY_COLUMNS
        .iter()
        .copied()
        .chain(RawVariable::ALL.iter().map(|v| v.column()))
        .collect();
    for name in &required {
        if !col_of.contains_key(name) {
            return Err(Error::Schema(format!("missing column `{name}`")));
        }
    }
    let pos = |name: &str| col_of[name];

    type Key = (String, String, i32);
    let mut rows: HashMap<Key, Vec<Option<f64>>> = HashMap::new();
    let mut reporters: Vec<String> = Vec::new();
    let mut partners: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let (mut min_year, mut max_year) = (i32::MAX, i32::MIN);

    for (line, rec) in records.enumerate() {
        let rec = rec?;
        let row_no = line + 2;
        let text = |name: &str| rec.get(pos(name)).unwrap_or("").to_string();
        let reporter = text("reporter");
        let partner = text("partner");
        if reporter.is_empty() || partner.is_empty() {
            return Err(Error::Parse {
                row: row_no,
                column: if reporter.is_empty() { "reporter" } else { "partner" }.into(),
                value: String::new(),
            });
        }
        let year_text = text("year");
        let year: i32 = year_text.parse().map_err(|_| Error::Parse {
            row: row_no,
            column: "year".into(),
            value: year_text.clone(),
        })?;
        if let Some((lo, hi)) = schema.years {
            if year < lo || year > hi {
                return Err(Error::Panel(format!(
                    "year {year} at row {row_no} outside declared range {lo}-{hi}"
                )));
            }
        }
        let mut values = Vec::with_capacity(RawVariable::ALL.len());
        for var in RawVariable::ALL {
            let cell = text(var.column());
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                values.push(None);
                continue;
            }
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| Error::Parse {
                row: row_no,
                column: var.column().into(),
                value: cell.clone(),
            })?;
            values.push(Some(v));
        }
        if !reporters.contains(&reporter) {
            reporters.push(reporter.clone());
        }
        let plist = partners.entry(reporter.clone()).or_default();
        if !plist.contains(&partner) {
            plist.push(partner.clone());
        }
        min_year = min_year.min(year);
        max_year = max_year.max(year);
        let key = (reporter.clone(), partner.clone(), year);
        if rows.insert(key, values).is_some() {
            return Err(Error::DuplicateKey(format!(
                "({reporter}, {partner}, {year}) at row {row_no}"
            )));
        }
    }
    if reporters.is_empty() {
        return Err(Error::Schema("file holds a header but no data rows".into()));
    }
    let (lo, hi) = schema.years.unwrap_or((min_year, max_year));
    let n_years = (hi - lo + 1) as usize;

    let mut panels = Vec::with_capacity(reporters.len());
    for reporter in reporters {
        let plist = partners.remove(&reporter).unwrap_or_default();
        let index = PanelIndex::new(plist.clone(), lo, n_years)
            .map_err(|e| Error::Panel(format!("reporter `{reporter}`: {e}")))?;
        let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(plist.len() * n_years); RawVariable::ALL.len()];
        for partner in &plist {
            for year in lo..=hi {
                let key = (reporter.clone(), partner.clone(), year);
                let vals = rows.get(&key).ok_or_else(|| {
                    Error::Panel(format!("unbalanced panel: no row for ({reporter}, {partner}, {year})"))
                })?;
                for (c, v) in columns.iter_mut().zip(vals) {
                    c.push(*v);
                }
            }
        }
        let series = columns
            .into_iter()
            .zip(RawVariable::ALL)
            .map(|(vals, var)| PanelSeries::new(var.column(), index.clone(), vals))
            .collect::<Result<Vec<_>>>()?;
        panels.push(BilateralPanel::new(reporter, index, series)?);
    }
    Ok(panels)
}

/// Canonical CSV form: key columns then the numeric columns in
/// `RawVariable::ALL` order, rows entity-major, missing cells as `NA`, numbers
/// in shortest round-trip notation.
pub fn write_panels<W: Write>(panels: &[BilateralPanel], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<&str> = KEY_COLUMNS.to_vec();
    header.extend(RawVariable::ALL.iter().map(|v| v.column()));
    w.write_record(&header)?;
    for p in panels {
        let idx = p.index();
        for (i, partner) in idx.entities().iter().enumerate() {
            for (t, year) in idx.periods().iter().enumerate() {
                let mut rec = vec![p.reporter().to_string(), partner.clone(), year.to_string()];
                for var in RawVariable::ALL {
                    rec.push(match p.get(var).get(i, t) {
                        Some(v) => format!("{v}"),
                        None => "NA".to_string(),
                    });
                }
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_panels(panels: &[BilateralPanel], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_panels(panels, std::io::BufWriter::new(file))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepairAction {
    Interpolated(f64),
    LeadingGap,
    TrailingGap,
    GapTooLong(usize),
}

impl fmt::Display for RepairAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepairAction::Interpolated(v) => write!(f, "interpolated {v}"),
            RepairAction::LeadingGap => write!(f, "unrepairable leading gap"),
            RepairAction::TrailingGap => write!(f, "unrepairable trailing gap"),
            RepairAction::GapTooLong(len) => write!(f, "unrepairable gap of length {len}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repair {
    pub variable: String,
    pub cell: Cell,
    pub action: RepairAction,
}

impl Repair {
    pub fn is_fill(&self) -> bool {
        matches!(self.action, RepairAction::Interpolated(_))
    }
}

/// Fills interior gaps of length `<= max_gap` linearly between the bracketing
/// observations. Leading, trailing and over-long gaps stay missing and are
/// listed in the report.
pub fn interpolate_gaps(series: &PanelSeries, max_gap: usize) -> Result<(PanelSeries, Vec<Repair>)> {
    let index = series.index();
    let t_len = index.n_periods();
    let mut values = series.values().to_vec();
    let mut report = Vec::new();
    for i in 0..index.n_entities() {
        let row = &mut values[i * t_len..(i + 1) * t_len];
        let mut t = 0;
        while t < t_len {
            if row[t].is_some() {
                t += 1;
                continue;
            }
            let start = t;
            while t < t_len && row[t].is_none() {
                t += 1;
            }
            let end = t; // exclusive
            let len = end - start;
            let unrepairable = if start == 0 {
                Some(RepairAction::LeadingGap)
            } else if end == t_len {
                Some(RepairAction::TrailingGap)
            } else if len > max_gap {
                Some(RepairAction::GapTooLong(len))
            } else {
                None
            };
            match unrepairable {
                Some(action) => {
                    for s in start..end {
                        report.push(Repair {
                            variable: series.name().to_string(),
                            cell: index.cell(i, s),
                            action: action.clone(),
                        });
                    }
                }
                None => {
                    let a = row[start - 1].unwrap();
                    let b = row[end].unwrap();
                    let span = (len + 1) as f64;
                    for s in start..end {
                        let w = (s - start + 1) as f64 / span;
                        let v = a + (b - a) * w;
                        row[s] = Some(v);
                        report.push(Repair {
                            variable: series.name().to_string(),
                            cell: index.cell(i, s),
                            action: RepairAction::Interpolated(v),
                        });
                    }
                }
            }
        }
    }
    Ok((PanelSeries::new(series.name(), index.clone(), values)?, report))
}

/// Writes the repair report as `variable,entity,period,action`.
pub fn write_repairs<W: Write>(repairs: &[Repair], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["variable", "entity", "period", "action"])?;
    for r in repairs {
        w.write_record([
            r.variable.clone(),
            r.cell.entity.clone(),
            r.cell.period.to_string(),
            r.action.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Natural log of every populated cell; zero or negative values are an error.
pub fn log_transform(series: &PanelSeries) -> Result<PanelSeries> {
    let index = series.index();
    series.try_map(series.name(), |v, i, t| {
        if v > 0.0 {
            Ok(v.ln())
        } else {
            Err(Error::NonPositive {
                variable: series.name().to_string(),
                cell: index.cell(i, t),
                value: v,
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_entity_pair(vals: &[Option<f64>]) -> PanelSeries {
        let idx = PanelIndex::new(vec!["A".into(), "B".into()], 2000, vals.len()).unwrap();
        let mut all = vals.to_vec();
        all.extend(std::iter::repeat_n(Some(1.0), vals.len()));
        PanelSeries::new("v", idx, all).unwrap()
    }

    #[test]
    fn midpoint_fill() {
        let (s, rep) = interpolate_gaps(&one_entity_pair(&[Some(4.0), None, Some(8.0)]), 1).unwrap();
        assert_eq!(s.entity_values(0), &[Some(4.0), Some(6.0), Some(8.0)]);
        assert_eq!(rep.len(), 1);
        assert!(rep[0].is_fill());
        assert_eq!(rep[0].cell.period, 2001);
    }

    #[test]
    fn leading_gap_untouched() {
        let input = one_entity_pair(&[None, Some(5.0), Some(7.0)]);
        let (s, rep) = interpolate_gaps(&input, 1).unwrap();
        assert_eq!(s, input);
        assert_eq!(rep[0].action, RepairAction::LeadingGap);
    }

    #[test]
    fn affine_fill_of_two_cells() {
        let (s, _) = interpolate_gaps(&one_entity_pair(&[Some(10.0), None, None, Some(16.0)]), 2).unwrap();
        assert_eq!(s.entity_values(0), &[Some(10.0), Some(12.0), Some(14.0), Some(16.0)]);
    }

    #[test]
    fn long_gap_is_reported() {
        let (s, rep) = interpolate_gaps(&one_entity_pair(&[Some(10.0), None, None, Some(16.0)]), 1).unwrap();
        assert!(!s.is_complete());
        assert_eq!(rep.len(), 2);
        assert_eq!(rep[0].action, RepairAction::GapTooLong(2));
    }

    #[test]
    fn log_values() {
        let s = one_entity_pair(&[Some(1.0), Some(std::f64::consts::E), Some(2.0)]);
        let l = log_transform(&s).unwrap();
        assert_eq!(l.get(0, 0), Some(0.0));
        assert!((l.get(0, 1).unwrap() - 1.0).abs() < 1e-15);
        let bad = one_entity_pair(&[Some(1.0), Some(0.0), Some(2.0)]);
        match log_transform(&bad) {
            Err(Error::NonPositive { cell, .. }) => assert_eq!(cell.period, 2001),
            other => panic!("expected NonPositive, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_names_first_column() {
        let err = read_panels("".as_bytes(), &SchemaConfig::default()).unwrap_err();
        assert!(err.to_string().contains("`reporter`"), "{err}");
    }
}
