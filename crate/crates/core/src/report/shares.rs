//! Bilateral-to-world shares of trade and FDI per reporter and year.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{BilateralPanel, RawVariable};

/// Flows covered by the share block, in column order.
pub const SHARE_VARIABLES: [RawVariable; 4] =
    [RawVariable::Exports, RawVariable::Imports, RawVariable::OutFdi, RawVariable::InFdi];

/// World totals of one reporter in one year (`None` when missing).
#[derive(Debug, Clone, PartialEq)]
pub struct TotalsRecord {
    pub reporter: String,
    pub year: i32,
    pub values: [Option<f64>; 4],
}

/// Reads `reporter,year,exports,imports,outfdi,infdi`; empty or `NA` cells are missing.
pub fn read_totals<R: Read>(reader: R) -> Result<Vec<TotalsRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("totals file lacks column `{name}`")))
    };
    let reporter_col = col("reporter")?;
    let year_col = col("year")?;
    let value_cols: Vec<usize> = SHARE_VARIABLES
        .iter()
        .map(|v| col(v.column()))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let parse_err = |c: usize| Error::Parse {
            row: row + 2,
            column: headers[c].clone(),
            value: cell(c).to_string(),
        };
        let year = cell(year_col).parse().map_err(|_| parse_err(year_col))?;
        let mut values = [None; 4];
        for (slot, &c) in values.iter_mut().zip(&value_cols) {
            let v = cell(c);
            if !(v.is_empty() || v.eq_ignore_ascii_case("na")) {
                *slot = Some(v.parse().map_err(|_| parse_err(c))?);
            }
        }
        out.push(TotalsRecord {
            reporter: cell(reporter_col).to_string(),
            year,
            values,
        });
    }
    Ok(out)
}

pub fn load_totals(path: impl AsRef<Path>) -> Result<Vec<TotalsRecord>> {
    read_totals(std::fs::File::open(path.as_ref())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareRow {
    pub year: i32,
    /// Bilateral sum over partners divided by the world total, in percent.
    pub shares: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareBlock {
    pub reporter: String,
    pub rows: Vec<ShareRow>,
    pub warnings: Vec<String>,
}

/// Per-year bilateral shares for `panel`. Years without a totals record
/// are dropped with a warning; a share is missing when any partner cell or
/// the total is missing or the total is not positive.
pub fn describe_shares(panel: &BilateralPanel, totals: &[TotalsRecord]) -> ShareBlock {
    let reporter = panel.reporter();
    let by_year: BTreeMap<i32, &TotalsRecord> = totals
        .iter()
        .filter(|r| r.reporter == reporter)
        .map(|r| (r.year, r))
        .collect();
    let index = panel.index();
    let mut rows = Vec::new();
    let mut missing_years = Vec::new();
    for (t, &year) in index.periods().iter().enumerate() {
        let Some(total) = by_year.get(&year) else {
            missing_years.push(year);
            continue;
        };
        let mut shares = [None; 4];
        for (k, var) in SHARE_VARIABLES.iter().enumerate() {
            let s = panel.get(*var);
            let bilateral: Option<f64> = (0..index.n_entities()).map(|i| s.get(i, t)).sum();
            shares[k] = match (bilateral, total.values[k]) {
                (Some(b), Some(w)) if w > 0.0 => Some(100.0 * b / w),
                _ => None,
            };
        }
        rows.push(ShareRow { year, shares });
    }
    let mut warnings = Vec::new();
    if !missing_years.is_empty() {
        warnings.push(format!(
            "totals for {reporter} cover {} of {} panel years; shares truncated (missing {})",
            rows.len(),
            index.n_periods(),
            missing_years.iter().map(|y| y.to_string()).collect::<Vec<_>>().join(", ")
        ));
    }
    ShareBlock {
        reporter: reporter.to_string(),
        rows,
        warnings,
    }
}

/// `reporter,year,exports,imports,outfdi,infdi` with shares in percent.
pub fn write_shares<W: Write>(blocks: &[ShareBlock], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["reporter".to_string(), "year".to_string()];
    header.extend(SHARE_VARIABLES.iter().map(|v| format!("{}_share_pct", v.column())));
    w.write_record(&header)?;
    for b in blocks {
        for r in &b.rows {
            let mut rec = vec![b.reporter.clone(), r.year.to_string()];
            rec.extend(r.shares.iter().map(|s| s.map(|v| format!("{v}")).unwrap_or_default()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{PanelIndex, PanelSeries};

    fn panel(scale: f64) -> (BilateralPanel, Vec<TotalsRecord>) {
        let idx = PanelIndex::new(vec!["A".into(), "B".into()], 2000, 3).unwrap();
        let series = RawVariable::ALL
            .iter()
            .map(|v| {
                let cee = *v == RawVariable::CeePartner;
                PanelSeries::from_fn(v.column(), idx.clone(), |i, t| {
                    Some(if cee { i as f64 } else { 1.0 + i as f64 + t as f64 })
                })
                .unwrap()
            })
            .collect();
        let p = BilateralPanel::new("R", idx, series).unwrap();
        let totals = (0..3)
            .map(|t| {
                let sum = (1.0 + t as f64) + (2.0 + t as f64);
                TotalsRecord { reporter: "R".into(), year: 2000 + t, values: [Some(sum / scale); 4] }
            })
            .collect();
        (p, totals)
    }

    #[test]
    fn bilateral_equal_to_totals_is_full_share() {
        let (p, totals) = panel(1.0);
        let block = describe_shares(&p, &totals);
        assert!(block.warnings.is_empty());
        for r in &block.rows {
            assert!(r.shares.iter().all(|s| (s.unwrap() - 100.0).abs() < 1e-12));
        }
    }

    #[test]
    fn tenth_of_totals_is_ten_percent() {
        let (p, totals) = panel(0.1);
        let block = describe_shares(&p, &totals);
        assert!((block.rows[1].shares[0].unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn short_totals_truncate_with_warning() {
        let (p, mut totals) = panel(1.0);
        totals.pop();
        let block = describe_shares(&p, &totals);
        assert_eq!(block.rows.len(), 2);
        assert_eq!(block.warnings.len(), 1);
    }

    #[test]
    fn reads_missing_cells() {
        let text = "reporter,year,exports,imports,outfdi,infdi\nR,2000,1,NA,,3\n";
        let t = read_totals(text.as_bytes()).unwrap();
        assert_eq!(t[0].values, [Some(1.0), None, None, Some(3.0)]);
        assert!(read_totals("reporter,year\n".as_bytes()).is_err());
    }
}
