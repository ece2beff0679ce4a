use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataio::{RawTable, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::stats;

/// Forward-fill, then back-fill, then zero-fill every sensor column.
///
/// Filling never crosses a trajectory boundary.
pub fn fill_missing(mut table: RawTable) -> RawTable {
    let runs = table.segment_runs();
    for col in &mut table.columns {
        for run in &runs {
            fill_column(&mut col[run.clone()]);
        }
    }
    table
}

fn fill_column(col: &mut [f64]) {
    let mut last = None;
    for v in col.iter_mut() {
        if v.is_nan() {
            if let Some(prev) = last {
                *v = prev;
            }
        } else {
            last = Some(*v);
        }
    }
    let mut next = None;
    for v in col.iter_mut().rev() {
        if v.is_nan() {
            if let Some(n) = next {
                *v = n;
            }
        } else {
            next = Some(*v);
        }
    }
    for v in col.iter_mut() {
        if v.is_nan() {
            *v = 0.0;
        }
    }
}

/// Reduces non-overlapping blocks of `window` rows to their per-sensor
/// median. A trailing partial block is reduced the same way, so each
/// trajectory of `T` rows becomes `ceil(T / window)` rows. A block is
/// labelled anomalous when any of its rows is.
pub fn downsample_median(table: &RawTable, window: usize) -> Result<RawTable> {
    if window == 0 {
        return Err(Error::invalid("downsample window must be at least 1"));
    }
    let blocks: Vec<Range<usize>> = table
        .segment_runs()
        .into_iter()
        .flat_map(|run| {
            (run.start..run.end)
                .step_by(window)
                .map(move |s| s..(s + window).min(run.end))
        })
        .collect();

    let columns = table
        .columns
        .iter()
        .map(|col| blocks.iter().map(|b| stats::median(&col[b.clone()])).collect())
        .collect();
    let labels = table.labels.as_ref().map(|l| {
        blocks
            .iter()
            .map(|b| u8::from(l[b.clone()].iter().any(|&x| x != 0)))
            .collect()
    });
    let pick_first = |v: &Option<Vec<String>>| {
        v.as_ref()
            .map(|v| blocks.iter().map(|b| v[b.start].clone()).collect())
    };
    Ok(RawTable {
        sensor_names: table.sensor_names.clone(),
        columns,
        labels,
        trajectories: pick_first(&table.trajectories),
        timestamps: pick_first(&table.timestamps),
    })
}

/// Removes sensors whose values over `train_range` are all identical.
pub fn drop_zero_variance(
    mut table: RawTable,
    train_range: Range<usize>,
) -> Result<(RawTable, Vec<String>)> {
    if train_range.is_empty() || train_range.end > table.n_rows() {
        return Err(Error::invalid(format!(
            "train range {train_range:?} invalid for {} rows",
            table.n_rows()
        )));
    }
    let mut dropped = Vec::new();
    let mut keep_names = Vec::new();
    let mut keep_cols = Vec::new();
    for (name, col) in table.sensor_names.into_iter().zip(table.columns) {
        let train = &col[train_range.clone()];
        if train.iter().all(|&v| v == train[0]) {
            dropped.push(name);
        } else {
            keep_names.push(name);
            keep_cols.push(col);
        }
    }
    if keep_cols.is_empty() {
        return Err(Error::invalid(
            "every sensor has zero variance over the training split",
        ));
    }
    table.sensor_names = keep_names;
    table.columns = keep_cols;
    Ok((table, dropped))
}

/// Per-sensor standardisation statistics from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Always `"population"`: the standard deviation divides by `T`.
    pub std_convention: String,
}

impl NormStats {
    pub fn apply(&self, sensor: usize, raw: f64) -> f64 {
        (raw - self.mean[sensor]) / self.std[sensor]
    }

    pub fn invert(&self, sensor: usize, normalized: f64) -> f64 {
        normalized * self.std[sensor] + self.mean[sensor]
    }

    pub fn invert_matrix(&self, values: &Matrix) -> Matrix {
        Matrix::from_fn(values.rows(), values.cols(), |r, c| {
            self.invert(c, values.get(r, c))
        })
    }
}

/// Standardises every sensor with mean and population std of `train_range`.
///
/// Rows in `train_range` form the training split; the dataset records
/// `train_range.end` as the split point, so `train_range` must start at 0.
pub fn normalize(table: &RawTable, train_range: Range<usize>) -> Result<TimeSeriesDataset> {
    let n_rows = table.n_rows();
    if train_range.start != 0 || train_range.is_empty() || train_range.end > n_rows {
        return Err(Error::invalid(format!(
            "train range {train_range:?} invalid for {n_rows} rows"
        )));
    }
    if table.missing_count() > 0 {
        return Err(Error::invalid("normalize called before fill_missing"));
    }
    let n = table.n_sensors();
    let mut mean = Vec::with_capacity(n);
    let mut std = Vec::with_capacity(n);
    for (name, col) in table.sensor_names.iter().zip(&table.columns) {
        let train = &col[train_range.clone()];
        let m = stats::mean(train);
        let s = stats::variance(train).sqrt();
        if s == 0.0 || !s.is_finite() {
            return Err(Error::invalid(format!(
                "sensor `{name}` has zero standard deviation on the training split"
            )));
        }
        mean.push(m);
        std.push(s);
    }
    let norm_stats = NormStats {
        mean,
        std,
        std_convention: "population".into(),
    };
    let values = Matrix::from_fn(n_rows, n, |r, c| norm_stats.apply(c, table.columns[c][r]));
    if !values.is_finite() {
        return Err(Error::NonFinite("normalize"));
    }

    let mut segments = Vec::with_capacity(n_rows);
    for (id, run) in table.segment_runs().into_iter().enumerate() {
        segments.extend(std::iter::repeat_n(id as u32, run.len()));
    }
    // The split point is always a segment boundary.
    if train_range.end < n_rows && segments[train_range.end] == segments[train_range.end - 1] {
        for s in &mut segments[train_range.end..] {
            *s += 1;
        }
    }

    Ok(TimeSeriesDataset {
        sensor_names: table.sensor_names.clone(),
        values,
        labels: table.labels.clone(),
        norm_stats,
        dropped_sensors: Vec::new(),
        segments,
        train_len: train_range.end,
    })
}
