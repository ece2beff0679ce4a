//! Pointwise detection metrics, forecast errors, and the comparison report.
//!
//! Detection is scored per timestep with no point adjustment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
}

pub fn prf1(predicted: &[u8], truth: &[u8]) -> Result<Detection> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(
            "prf1",
            format!("{} predictions for {} labels", predicted.len(), truth.len()),
        ));
    }
    let mut c = Counts::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Detection {
        precision,
        recall,
        f1,
        counts: c,
    })
}

/// Mean squared and mean absolute error over every entry.
pub fn forecast_metrics(pred: &Matrix, truth: &Matrix) -> Result<(f64, f64)> {
    if !pred.same_shape(truth) {
        return Err(Error::shape(
            "forecast_metrics",
            format!("{:?} vs {:?}", pred.shape(), truth.shape()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::invalid("forecast_metrics on an empty matrix"));
    }
    let n = pred.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, t) in pred.data().iter().zip(truth.data()) {
        let e = p - t;
        se += e * e;
        ae += e.abs();
    }
    Ok((se / n, ae / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Forecasters only.
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub counts: Counts,
}

impl MetricsSummary {
    pub fn new(detection: Detection, forecast: Option<(f64, f64)>) -> Self {
        Self {
            precision: detection.precision,
            recall: detection.recall,
            f1: detection.f1,
            mse: forecast.map(|f| f.0),
            mae: forecast.map(|f| f.1),
            counts: detection.counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub metrics: MetricsSummary,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
}

/// SHA-256 of a serialized configuration, hex encoded.
pub fn config_hash(serialized: &str) -> String {
    hex::encode(Sha256::digest(serialized.as_bytes()))
}

pub fn make_report(runs: Vec<(String, MetricsSummary)>, config_hash: &str) -> Result<ExperimentReport> {
    if runs.is_empty() {
        return Err(Error::invalid("a report needs at least one run"));
    }
    Ok(ExperimentReport {
        runs: runs
            .into_iter()
            .map(|(model, metrics)| RunRecord {
                model,
                metrics,
                config_hash: config_hash.to_string(),
            })
            .collect(),
    })
}

impl ExperimentReport {
    /// Aligned text table, one row per run.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let header = ["model", "precision", "recall", "f1", "mse", "mae"];
        let rows: Vec<[String; 6]> = self
            .runs
            .iter()
            .map(|r| {
                let m = &r.metrics;
                [
                    r.model.clone(),
                    format!("{:.4}", m.precision),
                    format!("{:.4}", m.recall),
                    format!("{:.4}", m.f1),
                    fmt(m.mse),
                    fmt(m.mae),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for row in &rows {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&width)
                .enumerate()
                .map(|(c, (s, w))| {
                    if c == 0 {
                        format!("{s:<w$}")
                    } else {
                        format!("{s:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &header);
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
        for row in &rows {
            line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        fs::write(dir.join("report.txt"), self.table())?;
        Ok(())
    }
}
