//! Single-sensor evaluation of each forecaster stage.

use crate::error::{Error, Result};
use crate::model::{HeadMode, OutputHead};
use crate::numcore::{leaky_relu, softplus, Matrix};

/// Per-sensor prediction. `point` is always the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mu: f64,
    pub sigma2: Option<f64>,
}

impl Prediction {
    pub fn point(&self) -> f64 {
        self.mu
    }
}

pub fn project(x: &[f64], w: &Matrix) -> Result<Vec<f64>> {
    if x.len() != w.cols() {
        return Err(Error::shape(
            "node_feature",
            format!("history of length {} for a {}x{} projection", x.len(), w.rows(), w.cols()),
        ));
    }
    Ok((0..w.rows())
        .map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect())
}

/// `g_i = v_i ⊕ W x_i`.
pub fn node_feature(v: &[f64], x: &[f64], w: &Matrix) -> Result<Vec<f64>> {
    if v.len() != w.rows() {
        return Err(Error::shape(
            "node_feature",
            format!("embedding of length {} for projection with {} rows", v.len(), w.rows()),
        ));
    }
    let mut g = v.to_vec();
    g.extend(project(x, w)?);
    Ok(g)
}

/// `π(i, j) = LeakyReLU(aᵀ (g_i ⊕ g_j))`.
pub fn attention_score(g_i: &[f64], g_j: &[f64], a: &[f64], slope: f64) -> f64 {
    debug_assert_eq!(a.len(), g_i.len() + g_j.len());
    let dot: f64 = g_i
        .iter()
        .chain(g_j)
        .zip(a)
        .map(|(g, a)| g * a)
        .sum();
    leaky_relu(dot, slope)
}

/// Softmax over the self-inclusive score set, with max subtraction.
pub fn attention_weights(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `z_i = ReLU(Σ_j α_ij W x_j)`, with `histories[k]` paired to `alpha[k]`.
pub fn aggregate(alpha: &[f64], w: &Matrix, histories: &[&[f64]]) -> Result<Vec<f64>> {
    if alpha.len() != histories.len() {
        return Err(Error::shape(
            "aggregate",
            format!("{} weights for {} histories", alpha.len(), histories.len()),
        ));
    }
    let mut z = vec![0.0; w.rows()];
    for (&a, x) in alpha.iter().zip(histories) {
        for (zi, p) in z.iter_mut().zip(project(x, w)?) {
            *zi += a * p;
        }
    }
    Ok(z.into_iter().map(|v| v.max(0.0)).collect())
}

/// Applies `f_φ` to `v_i ⊙ z_i`.
pub fn predict_distribution(v: &[f64], z: &[f64], head: &OutputHead) -> Prediction {
    let mut h: Vec<f64> = v.iter().zip(z).map(|(a, b)| a * b).collect();
    for layer in &head.hidden {
        h = layer.apply(&h).into_iter().map(|x| x.max(0.0)).collect();
    }
    let mu = head.mu.apply(&h)[0];
    let sigma2 = head
        .s
        .as_ref()
        .map(|s| softplus(s.apply(&h)[0]) + head.sigma_floor);
    Prediction { mu, sigma2 }
}

pub fn head_mode(head: &OutputHead) -> HeadMode {
    if head.s.is_some() {
        HeadMode::Gaussian
    } else {
        HeadMode::Point
    }
}
