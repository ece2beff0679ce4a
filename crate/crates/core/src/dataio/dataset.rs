use std::ops::Range;

use crate::dataio::NormStats;
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Preprocessed multivariate series. Rows `0..train_len` are the training
/// split, the rest the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub sensor_names: Vec<String>,
    /// `T x N`, normalised.
    pub values: Matrix,
    pub labels: Option<Vec<u8>>,
    pub norm_stats: NormStats,
    pub dropped_sensors: Vec<String>,
    /// Segment id per row; windows never span two segments.
    pub segments: Vec<u32>,
    pub train_len: usize,
}

impl TimeSeriesDataset {
    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn n_sensors(&self) -> usize {
        self.values.cols()
    }

    pub fn train_range(&self) -> Range<usize> {
        0..self.train_len
    }

    pub fn test_range(&self) -> Range<usize> {
        self.train_len..self.n_rows()
    }

    /// Fraction of anomalous rows in the training split, if labelled.
    pub fn train_label_rate(&self) -> Option<f64> {
        let labels = self.labels.as_ref()?;
        let train = &labels[self.train_range()];
        if train.is_empty() {
            return None;
        }
        Some(train.iter().filter(|&&l| l != 0).count() as f64 / train.len() as f64)
    }

    pub fn train_windows(&self, w: usize) -> Result<WindowBatch> {
        make_windows(self, w, 1, self.train_range())
    }

    pub fn test_windows(&self, w: usize) -> Result<WindowBatch> {
        make_windows(self, w, 1, self.test_range())
    }
}

/// Training pairs: histories `x` (`B x N x w`) and next readings (`B x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub n_sensors: usize,
    pub w: usize,
    /// Row-major `[b][sensor][step]`, oldest step first.
    pub inputs: Vec<f64>,
    pub targets: Matrix,
    pub target_times: Vec<usize>,
    pub target_labels: Option<Vec<u8>>,
}

impl WindowBatch {
    pub fn len(&self) -> usize {
        self.targets.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// History of `sensor` in window `b`.
    pub fn input(&self, b: usize, sensor: usize) -> &[f64] {
        let start = (b * self.n_sensors + sensor) * self.w;
        &self.inputs[start..start + self.w]
    }

    /// Histories stacked as a `(B*N) x w` matrix, rows ordered `(b, sensor)`.
    pub fn input_matrix(&self) -> Matrix {
        Matrix::from_vec(self.len() * self.n_sensors, self.w, self.inputs.clone())
            .expect("window buffer sized at construction")
    }

    /// Each window flattened to one row of length `N*w` (sensor-major).
    pub fn flattened(&self) -> Matrix {
        Matrix::from_vec(self.len(), self.n_sensors * self.w, self.inputs.clone())
            .expect("window buffer sized at construction")
    }

    pub fn subset(&self, indices: &[usize]) -> WindowBatch {
        let stride = self.n_sensors * self.w;
        let mut inputs = Vec::with_capacity(indices.len() * stride);
        for &b in indices {
            inputs.extend_from_slice(&self.inputs[b * stride..(b + 1) * stride]);
        }
        WindowBatch {
            n_sensors: self.n_sensors,
            w: self.w,
            inputs,
            targets: self.targets.select_rows(indices),
            target_times: indices.iter().map(|&b| self.target_times[b]).collect(),
            target_labels: self
                .target_labels
                .as_ref()
                .map(|l| indices.iter().map(|&b| l[b]).collect()),
        }
    }
}

/// One `(x, s)` pair for every target time `t` in `range` whose `w`
/// preceding rows lie in `range` and in the same segment as `t`. Target
/// times advance by `stride`.
pub fn make_windows(
    dataset: &TimeSeriesDataset,
    w: usize,
    stride: usize,
    range: Range<usize>,
) -> Result<WindowBatch> {
    if w == 0 || stride == 0 {
        return Err(Error::invalid("window length and stride must be at least 1"));
    }
    let n = dataset.n_sensors();
    let seg = &dataset.segments;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut times = Vec::new();
    let mut t = range.start + w;
    while t < range.end {
        if seg[t - w] == seg[t] {
            for i in 0..n {
                for s in t - w..t {
                    inputs.push(dataset.values.get(s, i));
                }
            }
            targets.extend_from_slice(dataset.values.row(t));
            times.push(t);
        }
        t += stride;
    }
    if times.is_empty() {
        return Err(Error::invalid(format!(
            "no segment in rows {range:?} is longer than the window length {w}"
        )));
    }
    let target_labels = dataset
        .labels
        .as_ref()
        .map(|l| times.iter().map(|&t| l[t]).collect());
    Ok(WindowBatch {
        n_sensors: n,
        w,
        inputs,
        targets: Matrix::from_vec(times.len(), n, targets)?,
        target_times: times,
        target_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(t: usize, n: usize, segments: Vec<u32>) -> TimeSeriesDataset {
        TimeSeriesDataset {
            sensor_names: (0..n).map(|i| format!("s{i}")).collect(),
            values: Matrix::from_fn(t, n, |r, c| (r * 10 + c) as f64),
            labels: Some((0..t).map(|r| (r % 2) as u8).collect()),
            norm_stats: NormStats {
                mean: vec![0.0; n],
                std: vec![1.0; n],
                std_convention: "population".into(),
            },
            dropped_sensors: vec![],
            segments,
            train_len: t,
        }
    }

    #[test]
    fn counts_targets() {
        let ds = dataset(7, 2, vec![0; 7]);
        let b = make_windows(&ds, 5, 1, 0..7).unwrap();
        assert_eq!(b.target_times, vec![5, 6]);
        assert_eq!(b.target_labels, Some(vec![1, 0]));
    }

    #[test]
    fn no_window_spans_segments() {
        let ds = dataset(12, 1, [vec![0; 6], vec![1; 6]].concat());
        let b = make_windows(&ds, 5, 1, 0..12).unwrap();
        assert_eq!(b.target_times, vec![5, 11]);
    }

    #[test]
    fn content_is_exact_slice() {
        let ds = dataset(9, 3, vec![0; 9]);
        let b = make_windows(&ds, 5, 1, 0..9).unwrap();
        for (k, &t) in b.target_times.iter().enumerate() {
            for i in 0..3 {
                let expect: Vec<f64> = (t - 5..t).map(|s| ds.values.get(s, i)).collect();
                assert_eq!(b.input(k, i), expect.as_slice());
            }
            assert_eq!(b.targets.row(k), ds.values.row(t));
        }
    }

    #[test]
    fn too_short_is_error() {
        let ds = dataset(5, 1, vec![0; 5]);
        assert!(make_windows(&ds, 5, 1, 0..5).is_err());
    }

    #[test]
    fn stride_and_subset() {
        let ds = dataset(12, 2, vec![0; 12]);
        let b = make_windows(&ds, 2, 3, 0..12).unwrap();
        assert_eq!(b.target_times, vec![2, 5, 8, 11]);
        let s = b.subset(&[3, 1]);
        assert_eq!(s.target_times, vec![11, 5]);
        assert_eq!(s.input(0, 1), b.input(3, 1));
    }
}
