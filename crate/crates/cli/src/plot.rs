//! Long-format plot data: one value per line.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context};

use qbands::bands::BandTable;
use qbands::vqd::KRecord;

pub const COLUMNS: &str = "path_distance,band,method,statistic,value";

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub path_distance: f64,
    pub band: usize,
    pub method: String,
    pub statistic: String,
    pub value: f64,
}

/// One `value` row per band and k-point; failed rows are skipped.
pub fn rows_from_table(table: &BandTable) -> Vec<PlotRow> {
    let mut out = Vec::new();
    for row in &table.rows {
        let Some(energies) = &row.energies else { continue };
        for (band, e) in energies.iter().enumerate() {
            out.push(PlotRow {
                path_distance: row.distance,
                band,
                method: e.provenance.as_str().to_string(),
                statistic: "value".into(),
                value: e.value,
            });
        }
    }
    out
}

/// Trial statistics per band, for box plots.
pub fn rows_from_trials(records: &[KRecord]) -> Vec<PlotRow> {
    let mut out = Vec::new();
    for rec in records {
        let Some(sol) = &rec.solution else { continue };
        for b in &sol.bands {
            let s = b.stats();
            for (name, v) in [("median", s.median), ("mean", s.mean), ("q1", s.q1), ("q3", s.q3)] {
                out.push(PlotRow {
                    path_distance: rec.distance,
                    band: b.band,
                    method: "optimized".into(),
                    statistic: name.into(),
                    value: v,
                });
            }
        }
    }
    out
}

pub fn to_csv(rows: &[PlotRow], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str(COLUMNS);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.path_distance, r.band, r.method, r.statistic, r.value);
    }
    out
}

pub fn parse_csv(text: &str) -> anyhow::Result<Vec<PlotRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == COLUMNS => {}
        Some((i, h)) => bail!("line {}: unexpected header '{h}'", i + 1),
        None => bail!("empty plot file"),
    }
    lines
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(anyhow!("line {}: expected 5 fields, got {}", i + 1, f.len()));
            }
            Ok(PlotRow {
                path_distance: f[0].parse().with_context(|| format!("line {}", i + 1))?,
                band: f[1].parse().with_context(|| format!("line {}", i + 1))?,
                method: f[2].to_string(),
                statistic: f[3].to_string(),
                value: f[4].parse().with_context(|| format!("line {}", i + 1))?,
            })
        })
        .collect()
}

/// Value of a `# key: value` header comment.
pub fn header_value(text: &str, key: &str) -> Option<String> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.trim_start_matches('#').trim().strip_prefix(key)?.strip_prefix(':').map(|v| v.trim().to_string()))
        .next()
}
