use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataio::WindowBatch;
use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub const RIDGE_LAMBDA: f64 = 1e-6;

/// Vector autoregression `x_t = c + Σ_l A_l x_{t-l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    pub order: usize,
    pub intercept: Vec<f64>,
    /// `coefs[l]` is `A_{l+1}`: entry `(i, j)` weights sensor `j` at lag
    /// `l + 1` in the forecast of sensor `i`.
    pub coefs: Vec<Matrix>,
    /// Ridge penalty used when the design was singular.
    pub ridge: Option<f64>,
}

/// Regression samples: each row of `lags` is `[x_{t-1}, ..., x_{t-p}]`
/// flattened sensor-minor; `targets` holds `x_t`.
struct Design {
    lags: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

fn solve(design: &Design, n: usize, order: usize, allow_ridge: bool) -> Result<VarModel> {
    let rows = design.lags.len();
    let cols = 1 + n * order;
    if rows <= n * order + 1 {
        return Err(Error::invalid(format!(
            "VAR({order}) on {n} sensors needs more than {} samples, got {rows}",
            n * order + 1
        )));
    }
    let z = DMatrix::from_fn(rows, cols, |r, c| if c == 0 { 1.0 } else { design.lags[r][c - 1] });
    let y = DMatrix::from_fn(rows, n, |r, c| design.targets[r][c]);
    let gram = z.transpose() * &z;
    let rhs = z.transpose() * &y;

    let scale = gram.diagonal().max().max(1e-300);
    let well_posed = |g: &DMatrix<f64>| {
        g.clone().cholesky().filter(|ch| {
            let l = ch.l_dirty();
            (0..cols).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * scale)
        })
    };
    let (chol, ridge) = match well_posed(&gram) {
        Some(ch) => (ch, None),
        None if allow_ridge => {
            log::warn!(
                "VAR design matrix is singular; refitting with ridge penalty {RIDGE_LAMBDA}"
            );
            let reg = &gram + DMatrix::identity(cols, cols) * RIDGE_LAMBDA;
            let ch = reg
                .cholesky()
                .ok_or_else(|| Error::invalid("VAR normal equations unsolvable even with ridge"))?;
            (ch, Some(RIDGE_LAMBDA))
        }
        None => {
            return Err(Error::invalid(format!(
                "singular VAR design matrix; retry with ridge fallback (lambda = {RIDGE_LAMBDA})"
            )))
        }
    };
    let beta = chol.solve(&rhs); // cols x n
    let intercept = (0..n).map(|i| beta[(0, i)]).collect();
    let coefs = (0..order)
        .map(|l| Matrix::from_fn(n, n, |i, j| beta[(1 + l * n + j, i)]))
        .collect();
    Ok(VarModel {
        order,
        intercept,
        coefs,
        ridge,
    })
}

impl VarModel {
    /// Fits on consecutive rows of `series` (`T x N`).
    pub fn fit_series(series: &Matrix, order: usize, allow_ridge: bool) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("VAR order must be at least 1"));
        }
        let (t, n) = series.shape();
        let mut design = Design {
            lags: Vec::new(),
            targets: Vec::new(),
        };
        for s in order..t {
            design
                .lags
                .push((1..=order).flat_map(|l| series.row(s - l).to_vec()).collect());
            design.targets.push(series.row(s).to_vec());
        }
        solve(&design, n, order, allow_ridge)
    }

    /// Fits on sliding windows, using the last `order` steps of each.
    pub fn fit_windows(batch: &WindowBatch, order: usize, allow_ridge: bool) -> Result<Self> {
        if order == 0 || order > batch.w {
            return Err(Error::invalid(format!(
                "VAR order {order} must lie in 1..={}",
                batch.w
            )));
        }
        let design = Design {
            lags: (0..batch.len()).map(|b| window_lags(batch, b, order)).collect(),
            targets: (0..batch.len()).map(|b| batch.targets.row(b).to_vec()).collect(),
        };
        solve(&design, batch.n_sensors, order, allow_ridge)
    }

    pub fn n_sensors(&self) -> usize {
        self.intercept.len()
    }

    /// One-step forecast; `lags[l]` is the observation `l + 1` steps back.
    pub fn forecast(&self, lags: &[&[f64]]) -> Result<Vec<f64>> {
        let n = self.n_sensors();
        if lags.len() < self.order || lags.iter().any(|x| x.len() != n) {
            return Err(Error::shape(
                "var_forecast",
                format!("need {} lags of {n} sensors", self.order),
            ));
        }
        Ok((0..n)
            .map(|i| {
                let mut acc = self.intercept[i];
                for (a, x) in self.coefs.iter().zip(lags) {
                    acc += a.row(i).iter().zip(x.iter()).map(|(c, v)| c * v).sum::<f64>();
                }
                acc
            })
            .collect())
    }

    /// Forecasts every target of `batch` (`B x N`).
    pub fn forecast_windows(&self, batch: &WindowBatch) -> Result<Matrix> {
        let n = self.n_sensors();
        if batch.n_sensors != n || batch.w < self.order {
            return Err(Error::shape(
                "var_forecast",
                format!("model for {n} sensors and order {}, batch of {} sensors with w = {}",
                    self.order, batch.n_sensors, batch.w),
            ));
        }
        let mut out = Matrix::zeros(batch.len(), n);
        for b in 0..batch.len() {
            let lags: Vec<Vec<f64>> = (1..=self.order)
                .map(|l| (0..n).map(|j| batch.input(b, j)[batch.w - l]).collect())
                .collect();
            let refs: Vec<&[f64]> = lags.iter().map(Vec::as_slice).collect();
            out.row_mut(b).copy_from_slice(&self.forecast(&refs)?);
        }
        Ok(out)
    }
}

fn window_lags(batch: &WindowBatch, b: usize, order: usize) -> Vec<f64> {
    (1..=order)
        .flat_map(|l| (0..batch.n_sensors).map(move |j| batch.input(b, j)[batch.w - l]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_ar_coefficient() {
        // deterministic decay plus a repeated kick so the design is full rank
        let mut x = vec![1.0];
        for t in 1..60 {
            let kick = if t % 7 == 0 { 1.0 } else { 0.0 };
            x.push(0.5 * x[t - 1] + kick);
        }
        let mut design = Design { lags: vec![], targets: vec![] };
        for t in 1..60 {
            if t % 7 != 0 {
                design.lags.push(vec![x[t - 1]]);
                design.targets.push(vec![x[t]]);
            }
        }
        let m = solve(&design, 1, 1, false).unwrap();
        assert!((m.coefs[0].get(0, 0) - 0.5).abs() < 1e-8);
        assert!(m.intercept[0].abs() < 1e-8);
    }

    #[test]
    fn too_few_samples() {
        let s = Matrix::from_fn(4, 2, |r, c| (r * 2 + c) as f64);
        assert!(VarModel::fit_series(&s, 2, true).is_err());
    }

    #[test]
    fn singular_uses_ridge_or_errors() {
        // two identical sensors make the lag columns collinear
        let s = Matrix::from_fn(30, 2, |r, _| ((r * 37) % 11) as f64);
        assert!(VarModel::fit_series(&s, 1, false).is_err());
        let m = VarModel::fit_series(&s, 1, true).unwrap();
        assert_eq!(m.ridge, Some(RIDGE_LAMBDA));
    }
}
