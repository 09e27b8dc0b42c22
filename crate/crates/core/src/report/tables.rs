//! Display tables: Markdown for reading, long CSV as the machine contract.
//!
//! Rounding happens only here and only for display; CSV records carry the
//! full-precision numbers next to the display string.

use std::io::Write;

use crate::error::Result;

/// Significance stars: `***` at 1%, `**` at 5%, `*` at 10%, inclusive.
pub fn format_stars(p: f64) -> &'static str {
    if p <= 0.01 {
        "***"
    } else if p <= 0.05 {
        "**"
    } else if p <= 0.10 {
        "*"
    } else {
        ""
    }
}

/// Three significant figures, never more than two decimals
/// (`-176`, `-51.4`, `6.34`, `0.06`).
pub fn format_coef(x: f64) -> String {
    if !x.is_finite() {
        return "NA".into();
    }
    let a = x.abs();
    let decimals = if a >= 100.0 {
        0
    } else if a >= 10.0 {
        1
    } else {
        2
    };
    let s = format!("{x:.decimals$}");
    // avoid "-0.00"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// Fixed decimals with `-0.00` normalised to `0.00`.
pub fn format_fixed(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return "NA".into();
    }
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// `stat (p)` with the given decimals, or the bare statistic without a p-value.
pub fn format_test(stat: f64, p: Option<f64>, stat_decimals: usize, p_decimals: usize) -> String {
    match p {
        Some(p) => format!("{} ({})", format_fixed(stat, stat_decimals), format_fixed(p, p_decimals)),
        None => format_fixed(stat, stat_decimals),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableRow {
    /// Italic block header spanning the table.
    Section(String),
    Data { label: String, cells: Vec<String> },
}

/// One machine-readable cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub section: String,
    pub row: String,
    pub reporter: String,
    pub column: String,
    pub value: Option<f64>,
    pub se: Option<f64>,
    pub p_value: Option<f64>,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem of the CSV, e.g. `reg_exports_outfdi`.
    pub key: String,
    pub title: String,
    /// Header of the label column.
    pub stub: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
    pub notes: Vec<String>,
    pub records: Vec<Record>,
}

const ROMAN: [&str; 10] = ["i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x"];

impl Table {
    /// Notes joined as `Notes: (i) ...; (ii) ...`.
    pub fn notes_line(&self) -> String {
        let parts: Vec<String> = self
            .notes
            .iter()
            .enumerate()
            .map(|(k, n)| format!("({}) {n}", ROMAN.get(k).copied().unwrap_or("?")))
            .collect();
        format!("Notes: {}.", parts.join("; "))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {}\n\n", self.title);
        let width = self.columns.len();
        out += &format!("| {} | {} |\n", self.stub, self.columns.join(" | "));
        out += &format!("|---|{}\n", "---|".repeat(width));
        for row in &self.rows {
            match row {
                TableRow::Section(s) => {
                    out += &format!("| *{s}* |{}\n", " |".repeat(width));
                }
                TableRow::Data { label, cells } => {
                    out += &format!("| {label} | {} |\n", cells.join(" | "));
                }
            }
        }
        if !self.notes.is_empty() {
            out += &format!("\n{}\n", self.notes_line());
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_records(&self.records, writer)
    }
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => String::new(),
    }
}

pub const CSV_HEADER: [&str; 8] = ["section", "row", "reporter", "column", "value", "se", "p_value", "display"];

pub fn write_records<W: Write>(records: &[Record], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.section.as_str(),
            r.row.as_str(),
            r.reporter.as_str(),
            r.column.as_str(),
            &num(r.value),
            &num(r.se),
            &num(r.p_value),
            r.display.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_thresholds_are_inclusive() {
        assert_eq!(format_stars(0.004), "***");
        assert_eq!(format_stars(0.01), "***");
        assert_eq!(format_stars(0.05), "**");
        assert_eq!(format_stars(0.10), "*");
        assert_eq!(format_stars(0.5), "");
    }

    #[test]
    fn coefficient_rounding() {
        assert_eq!(format_coef(-176.2), "-176");
        assert_eq!(format_coef(-51.43), "-51.4");
        assert_eq!(format_coef(6.344), "6.34");
        assert_eq!(format_coef(0.0612), "0.06");
        assert_eq!(format_coef(-0.001), "0.00");
        assert_eq!(format_fixed(-0.0004, 2), "0.00");
        assert_eq!(format_test(5.834, Some(0.8249), 2, 2), "5.83 (0.82)");
        assert_eq!(format_test(0.0, None, 2, 2), "0.00");
    }

    #[test]
    fn markdown_layout() {
        let t = Table {
            key: "t".into(),
            title: "T".into(),
            stub: "Tests".into(),
            columns: vec!["A".into(), "B".into()],
            rows: vec![
                TableRow::Section("blk".into()),
                TableRow::Data { label: "r".into(), cells: vec!["1".into(), "2".into()] },
            ],
            notes: vec!["first".into(), "second".into()],
            records: vec![],
        };
        let md = t.to_markdown();
        assert!(md.contains("| Tests | A | B |\n|---|---|---|\n| *blk* | | |\n| r | 1 | 2 |"));
        assert!(md.contains("Notes: (i) first; (ii) second."));
    }
}
