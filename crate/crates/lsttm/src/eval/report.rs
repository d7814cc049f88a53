//! Report files: line-delimited `(model, seed, hour, auc)` rows plus a
//! human-readable comparison table. Floats print in shortest round-trip
//! form, so read -> write reproduces the file bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::HourlyReport;

pub const REPORT_COLUMNS: &str = "model\tseed\thour\tauc";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub seed: u64,
    pub hour: u8,
    /// `None` for hours flagged as unevaluable.
    pub auc: Option<f64>,
}

/// Machine rows of one single-seed report.
pub fn rows_of(report: &HourlyReport) -> Vec<ReportRow> {
    let seed = *report.seeds.first().expect("report without a seed");
    report
        .hours
        .iter()
        .enumerate()
        .map(|(hour, auc)| ReportRow {
            model: report.model.clone(),
            seed,
            hour: hour as u8,
            auc: *auc,
        })
        .collect()
}

pub fn rows_to_text(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(REPORT_COLUMNS);
    out.push('\n');
    for r in rows {
        match r.auc {
            Some(v) => {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", r.model, r.seed, r.hour, v);
            }
            None => {
                let _ = writeln!(out, "{}\t{}\t{}\tna", r.model, r.seed, r.hour);
            }
        }
    }
    out
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    crate::config::write_atomic(path, rows_to_text(rows).as_bytes())
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path)?;
    rows_from_text(&text, &path.display().to_string())
}

pub fn rows_from_text(text: &str, origin: &str) -> Result<Vec<ReportRow>> {
    let err = |line: usize, msg: String| Error::Parse { path: origin.to_string(), line, msg };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == REPORT_COLUMNS => {}
        other => return Err(err(1, format!("bad report header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(err(idx + 1, format!("expected 4 columns, got {}", cols.len())));
        }
        let seed: u64 =
            cols[1].parse().map_err(|_| err(idx + 1, format!("bad seed `{}`", cols[1])))?;
        let hour: u8 =
            cols[2].parse().map_err(|_| err(idx + 1, format!("bad hour `{}`", cols[2])))?;
        let auc = if cols[3] == "na" {
            None
        } else {
            Some(cols[3].parse::<f64>().map_err(|_| err(idx + 1, format!("bad auc `{}`", cols[3])))?)
        };
        rows.push(ReportRow { model: cols[0].to_string(), seed, hour, auc });
    }
    Ok(rows)
}

fn median(mut vals: Vec<f64>) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite auc"));
    Some(vals[vals.len() / 2])
}

/// Group rows by model (first-appearance order) and render per-period
/// medians across seeds.
pub fn comparison_table(rows: &[ReportRow]) -> String {
    let mut models: Vec<String> = Vec::new();
    for r in rows {
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:>9} {:>9} {:>9}", "model", "period1", "period2", "period3");
    for model in &models {
        let mut seeds: Vec<u64> = Vec::new();
        for r in rows.iter().filter(|r| &r.model == model) {
            if !seeds.contains(&r.seed) {
                seeds.push(r.seed);
            }
        }
        let mut period_meds = [None; 3];
        for (p, slot) in period_meds.iter_mut().enumerate() {
            let per_seed: Vec<f64> = seeds
                .iter()
                .filter_map(|&s| {
                    let vals: Vec<f64> = rows
                        .iter()
                        .filter(|r| {
                            &r.model == model
                                && r.seed == s
                                && (p * 8..(p + 1) * 8).contains(&(r.hour as usize))
                        })
                        .filter_map(|r| r.auc)
                        .collect();
                    if vals.is_empty() {
                        None
                    } else {
                        Some(vals.iter().sum::<f64>() / vals.len() as f64)
                    }
                })
                .collect();
            *slot = median(per_seed);
        }
        let cell = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "na".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<14} {:>9} {:>9} {:>9}",
            model,
            cell(period_meds[0]),
            cell(period_meds[1]),
            cell(period_meds[2]),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for seed in [1u64, 2] {
            for hour in 0..24u8 {
                rows.push(ReportRow {
                    model: "full".into(),
                    seed,
                    hour,
                    auc: if hour == 3 { None } else { Some(0.5 + hour as f64 / 100.0 + seed as f64 * 1e-5) },
                });
            }
        }
        rows
    }

    #[test]
    fn text_roundtrip_is_bit_exact() {
        let rows = sample_rows();
        let text = rows_to_text(&rows);
        let back = rows_from_text(&text, "mem").unwrap();
        assert_eq!(rows, back);
        assert_eq!(text, rows_to_text(&back));
    }

    #[test]
    fn table_has_one_row_per_model() {
        let mut rows = sample_rows();
        for r in sample_rows() {
            rows.push(ReportRow { model: "no-meta".into(), ..r });
        }
        let table = comparison_table(&rows);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("full"));
        assert!(lines[2].starts_with("no-meta"));
    }

    #[test]
    fn bad_rows_name_the_line() {
        let text = format!("{REPORT_COLUMNS}\nfull\t1\t0\tnot-a-number\n");
        let err = rows_from_text(&text, "mem").unwrap_err();
        assert!(err.to_string().contains("mem:2"), "{err}");
    }
}
