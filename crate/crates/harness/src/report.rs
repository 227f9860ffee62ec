//! Per-replication raw values, their summary, and the rendered table.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Outcome of one method on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub replication: usize,
    pub seed: u64,
    pub dataset_hash: String,
    pub n: usize,
    pub logged_total: f64,
    pub method: String,
    pub true_value: Option<f64>,
    pub improvement: Option<f64>,
    pub entropy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub name: String,
    pub mean_reward: f64,
    pub median_reward: f64,
    /// `P(I > t)` for each configured threshold, in order.
    pub p_above: Vec<f64>,
    pub p_negative: f64,
    pub mean_entropy: f64,
    pub completed: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub thresholds: Vec<f64>,
    pub methods: Vec<MethodSummary>,
    pub raw: Vec<RawRecord>,
}

impl ReplicationReport {
    /// Summarizes `raw` for each of `methods`, in the given order.
    pub fn from_raw(methods: &[String], thresholds: &[f64], raw: Vec<RawRecord>) -> Self {
        let methods = methods
            .iter()
            .map(|name| summarize(name, thresholds, &raw))
            .collect();
        Self {
            thresholds: thresholds.to_vec(),
            methods,
            raw,
        }
    }

    pub fn failures(&self) -> usize {
        self.methods.iter().map(|m| m.failures).sum()
    }

    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn write_raw_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.raw {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn read_raw_csv<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

fn summarize(name: &str, thresholds: &[f64], raw: &[RawRecord]) -> MethodSummary {
    let rows: Vec<&RawRecord> = raw.iter().filter(|r| r.method == name).collect();
    let ok: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r.true_value?, r.improvement?, r.entropy?)))
        .collect();
    let count = ok.len() as f64;
    let frac = |pred: &dyn Fn(f64) -> bool| ok.iter().filter(|t| pred(t.1)).count() as f64 / count;
    MethodSummary {
        name: name.to_string(),
        mean_reward: ok.iter().map(|t| t.0).sum::<f64>() / count,
        median_reward: median(ok.iter().map(|t| t.0).collect()),
        p_above: thresholds.iter().map(|&t| frac(&|i| i > t)).collect(),
        p_negative: frac(&|i| i < 0.0),
        mean_entropy: ok.iter().map(|t| t.2).sum::<f64>() / count,
        completed: ok.len(),
        failures: rows.len() - ok.len(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Label for an improvement threshold, e.g. `0.1` → `P(I > 10%)`.
pub fn threshold_label(t: f64) -> String {
    let pct = (t * 100.0 * 1e9).round() / 1e9;
    format!("P(I > {pct}%)")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

/// Rows are methods; columns are `E[r]`, `M[r]`, each `P(I > t)` and `P(I < 0)`.
/// Rewards use 3 decimals and probabilities 2.
pub fn render_table(report: &ReplicationReport) -> Result<RenderedTable> {
    let mut header = vec!["method".to_string(), "E[r]".into(), "M[r]".into()];
    header.extend(report.thresholds.iter().map(|&t| threshold_label(t)));
    header.push("P(I < 0)".into());

    let rows: Vec<Vec<String>> = report
        .methods
        .iter()
        .map(|m| {
            let mut row = vec![
                m.name.clone(),
                format!("{:.3}", m.mean_reward),
                format!("{:.3}", m.median_reward),
            ];
            row.extend(m.p_above.iter().map(|p| format!("{p:.2}")));
            row.push(format!("{:.2}", m.p_negative));
            row
        })
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in &rows {
        w.write_record(row)?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
        .expect("csv output is utf-8");

    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain(std::iter::once(header[c].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut text = line(&header);
    for row in &rows {
        text.push_str(&line(row));
    }
    Ok(RenderedTable { text, csv })
}
