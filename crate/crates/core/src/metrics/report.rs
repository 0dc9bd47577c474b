//! Text and CSV rendering of evaluation results.
//!
//! Ratios are shown as percentages rounded to two decimals; a [`ReportRow`]
//! stores exactly what is printed, so a CSV written by [`render_csv`] parses
//! back to equal rows.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalResult;
use crate::error::{Error, Result};

pub const COLUMNS: [&str; 10] = ["HOTA", "DetA", "AssA", "MOTA", "IDF1", "OSPA", "TP", "FP", "FN", "IDSW"];

/// Name of the pooled row.
pub const COMBINED: &str = "COMBINED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    /// HOTA, DetA, AssA, MOTA, IDF1, OSPA in percent, two decimals.
    pub percent: [f64; 6],
    /// TP, FP, FN, IDSW.
    pub counts: [u64; 4],
}

fn pct(v: f64) -> f64 {
    // Round through the decimal rendering so parse(format(x)) == x.
    format!("{:.2}", v * 100.0).parse().unwrap_or(f64::NAN)
}

impl ReportRow {
    pub fn new(name: impl Into<String>, r: &EvalResult) -> Self {
        ReportRow {
            name: name.into(),
            percent: [r.hota, r.deta, r.assa, r.mota, r.idf1, r.ospa].map(pct),
            counts: [r.tp, r.fp, r.fn_, r.idsw],
        }
    }

    fn cells(&self) -> Vec<String> {
        let mut cells = vec![self.name.clone()];
        cells.extend(self.percent.iter().map(|v| format!("{v:.2}")));
        cells.extend(self.counts.iter().map(u64::to_string));
        cells
    }
}

/// Aligned table: a header, then one row per entry.
pub fn render_text(rows: &[ReportRow]) -> String {
    let mut table: Vec<Vec<String>> = vec![std::iter::once("Sequence".to_string())
        .chain(COLUMNS.iter().map(|c| c.to_string()))
        .collect()];
    table.extend(rows.iter().map(ReportRow::cells));
    let widths: Vec<usize> = (0..table[0].len())
        .map(|k| table.iter().map(|r| r[k].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { format!("{c:<w$}", w = widths[k]) } else { format!("{c:>w$}", w = widths[k]) })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = format!("sequence,{}\n", COLUMNS.join(","));
    for r in rows {
        let _ = writeln!(out, "{}", r.cells().join(","));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::validation("empty report"))?;
    if header.trim() != format!("sequence,{}", COLUMNS.join(",")) {
        return Err(Error::validation(format!("unexpected report header '{header}'")));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(Error::FieldCount {
                    line: k + 2,
                    found: f.len(),
                });
            }
            let bad = |i: usize| Error::validation(format!("report line {}: bad value '{}'", k + 2, f[i]));
            let mut percent = [0.0; 6];
            for (i, p) in percent.iter_mut().enumerate() {
                *p = f[i + 1].parse().map_err(|_| bad(i + 1))?;
            }
            let mut counts = [0u64; 4];
            for (i, c) in counts.iter_mut().enumerate() {
                *c = f[i + 7].parse().map_err(|_| bad(i + 7))?;
            }
            Ok(ReportRow {
                name: f[0].to_string(),
                percent,
                counts,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(v: f64) -> EvalResult {
        EvalResult {
            hota: v,
            deta: v,
            assa: v,
            loca: v,
            mota: -0.123456,
            idf1: 0.6,
            ospa: 0.0,
            tp: 9,
            fp: 1,
            fn_: 2,
            idsw: 1,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![ReportRow::new("seq-a", &result(0.987654)), ReportRow::new(COMBINED, &result(1.0))];
        assert_eq!(rows[0].percent[0], 98.77);
        assert_eq!(rows[0].percent[3], -12.35);
        assert_eq!(parse_csv(&render_csv(&rows)).unwrap(), rows);
    }

    #[test]
    fn text_table_is_aligned() {
        let rows = vec![ReportRow::new("a", &result(1.0)), ReportRow::new(COMBINED, &result(0.5))];
        let text = render_text(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("Sequence"));
        assert!(lines[1].contains("100.00") && lines[1].contains("60.00"));
        assert_eq!(lines[1].len(), lines[2].len());
    }

    #[test]
    fn bad_csv_rejected() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("sequence,HOTA\n").is_err());
        let bad = format!("sequence,{}\na,1,2\n", COLUMNS.join(","));
        assert!(matches!(parse_csv(&bad), Err(Error::FieldCount { .. })));
    }
}
