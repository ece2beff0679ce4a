use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Principal axes of a data matrix, scored by squared reconstruction error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k x p`, one unit-norm axis per row, by decreasing variance.
    pub components: Matrix,
    /// Variance along each retained axis.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

/// Eigen-decomposition of the population covariance, sorted by decreasing
/// eigenvalue, axes sign-normalised.
fn decompose(data: &Matrix) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let (n, p) = data.shape();
    if n == 0 || p == 0 {
        return Err(Error::invalid("PCA needs a non-empty data matrix"));
    }
    if (1..n).all(|r| data.row(r) == data.row(0)) {
        return Err(Error::invalid("PCA input rows are all identical"));
    }
    let mean: Vec<f64> = (0..p)
        .map(|c| (0..n).map(|r| data.get(r, c)).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, p, |r, c| data.get(r, c) - mean[c]);
    let cov = (centered.transpose() * &centered) / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let axes: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let mut axis: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            normalize_sign(&mut axis);
            axis
        })
        .collect();
    Ok((mean, values, axes))
}

/// Flips `axis` so its largest-magnitude coordinate is positive.
pub fn normalize_sign(axis: &mut [f64]) {
    let mut best = 0;
    for (i, v) in axis.iter().enumerate() {
        if v.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis[best] < 0.0 {
        for v in axis.iter_mut() {
            *v = -*v;
        }
    }
}

impl Pca {
    pub fn fit(data: &Matrix, n_components: usize) -> Result<Self> {
        let p = data.cols();
        if n_components == 0 || n_components > p {
            return Err(Error::invalid(format!(
                "n_components {n_components} outside 1..={p}"
            )));
        }
        let (mean, values, axes) = decompose(data)?;
        Ok(Self::from_parts(mean, &values, &axes, n_components))
    }

    /// Smallest component count whose cumulative variance reaches `ratio`.
    pub fn fit_variance(data: &Matrix, ratio: f64) -> Result<Self> {
        let (mean, values, axes) = decompose(data)?;
        let total: f64 = values.iter().sum();
        let mut acc = 0.0;
        let mut k = values.len();
        for (i, v) in values.iter().enumerate() {
            acc += v;
            if acc >= ratio * total {
                k = i + 1;
                break;
            }
        }
        Ok(Self::from_parts(mean, &values, &axes, k))
    }

    fn from_parts(mean: Vec<f64>, values: &[f64], axes: &[Vec<f64>], k: usize) -> Self {
        let p = mean.len();
        let components = Matrix::from_fn(k, p, |r, c| axes[r][c]);
        Self {
            mean,
            components,
            explained_variance: values[..k].to_vec(),
            total_variance: values.iter().sum(),
        }
    }

    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    /// Coordinates of each row of `data` along the retained axes.
    pub fn transform(&self, data: &Matrix) -> Matrix {
        Matrix::from_fn(data.rows(), self.n_components(), |r, k| {
            data.row(r)
                .iter()
                .zip(&self.mean)
                .zip(self.components.row(k))
                .map(|((x, m), a)| (x - m) * a)
                .sum()
        })
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut out = self.mean.clone();
        for k in 0..self.n_components() {
            let axis = self.components.row(k);
            let coef: f64 = centered.iter().zip(axis).map(|(a, b)| a * b).sum();
            for (o, a) in out.iter_mut().zip(axis) {
                *o += coef * a;
            }
        }
        out
    }

    /// Squared norm of `x - reconstruct(x)`.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.reconstruct(x)
            .iter()
            .zip(x)
            .map(|(r, v)| (v - r) * (v - r))
            .sum()
    }
}
