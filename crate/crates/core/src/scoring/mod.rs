//! Robust error standardisation, Max Robust Error, and the quantile
//! threshold shared by every model.

mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{AnomalyReport, ReportContext, MRE_SCORE};

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::stats::{quantile, quantile_sorted, sorted_copy};

pub const IQR_FLOOR: f64 = 1e-6;

/// Per-sensor median and interquartile range of training absolute errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustStats {
    pub median: Vec<f64>,
    /// `Q3 − Q1`, floored at `iqr_floor`.
    pub iqr: Vec<f64>,
    pub iqr_floor: f64,
}

/// `|pred − truth|` elementwise.
pub fn abs_errors(pred: &Matrix, truth: &Matrix) -> Result<Matrix> {
    if !pred.same_shape(truth) {
        return Err(Error::shape(
            "abs_errors",
            format!("{:?} vs {:?}", pred.shape(), truth.shape()),
        ));
    }
    Ok(pred.zip_map(truth, |p, t| (p - t).abs()))
}

pub fn robust_stats(train_abs_errors: &Matrix) -> Result<RobustStats> {
    let (t, n) = train_abs_errors.shape();
    if n == 0 || t < 4 {
        return Err(Error::invalid(format!(
            "robust statistics need at least 4 training errors per sensor, got {t} x {n}"
        )));
    }
    if !train_abs_errors.is_finite() {
        return Err(Error::NonFinite("training errors"));
    }
    let mut median = Vec::with_capacity(n);
    let mut iqr = Vec::with_capacity(n);
    for i in 0..n {
        let col = sorted_copy(&train_abs_errors.col_values(i));
        median.push(quantile_sorted(&col, 0.5));
        let spread = quantile_sorted(&col, 0.75) - quantile_sorted(&col, 0.25);
        iqr.push(spread.max(IQR_FLOOR));
    }
    Ok(RobustStats {
        median,
        iqr,
        iqr_floor: IQR_FLOOR,
    })
}

/// `max_i (e_i − μ̃_i) / σ̃_i` and the sensor attaining it (lowest index on
/// ties).
pub fn mre(errors: &[f64], stats: &RobustStats) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, e) in errors.iter().enumerate() {
        let r = (e - stats.median[i]) / stats.iqr[i];
        if r > best {
            best = r;
            arg = i;
        }
    }
    (best, arg)
}

/// [`mre`] for every row of `errors`.
pub fn mre_all(errors: &Matrix, stats: &RobustStats) -> Result<(Vec<f64>, Vec<usize>)> {
    if errors.cols() != stats.median.len() {
        return Err(Error::shape(
            "mre",
            format!("{} sensors in errors, {} in stats", errors.cols(), stats.median.len()),
        ));
    }
    Ok((0..errors.rows())
        .into_par_iter()
        .map(|r| mre(errors.row(r), stats))
        .unzip())
}

/// `(1 − r)`-quantile of the training scores.
pub fn fit_threshold(train_scores: &[f64], anomaly_rate: f64) -> Result<f64> {
    if train_scores.is_empty() {
        return Err(Error::invalid("no training scores to fit a threshold on"));
    }
    if !(anomaly_rate > 0.0 && anomaly_rate < 1.0) {
        return Err(Error::invalid(format!(
            "anomaly rate must lie in (0, 1), got {anomaly_rate}"
        )));
    }
    if train_scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("training scores"));
    }
    Ok(quantile(train_scores, 1.0 - anomaly_rate))
}

/// `1` where the score is strictly above `tau`.
pub fn detect(scores: &[f64], tau: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s > tau)).collect()
}
