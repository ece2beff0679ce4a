use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Bias-corrected Adam state for an ordered list of parameter blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub const DEFAULT_EPS: f64 = 1e-8;

    /// Zeroed moments shaped like `params`.
    pub fn new<'a>(
        params: impl IntoIterator<Item = &'a Matrix>,
        lr: f64,
        beta1: f64,
        beta2: f64,
    ) -> Self {
        let m: Vec<Matrix> = params
            .into_iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            v: m.clone(),
            m,
            step_count: 0,
            lr,
            beta1,
            beta2,
            eps: Self::DEFAULT_EPS,
        }
    }
}

/// One Adam update over named parameter blocks.
///
/// Gradients are validated before any parameter is touched, so a non-finite
/// gradient leaves both the parameters and the state unchanged.
pub fn adam_step(
    params: &mut [(&str, &mut Matrix)],
    grads: &[Matrix],
    state: &mut AdamState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "{} parameter blocks, {} gradients, {} moment blocks",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        ));
    }
    for (i, ((name, p), g)) in params.iter().zip(grads).enumerate() {
        if !p.same_shape(g) || !p.same_shape(&state.m[i]) || !p.same_shape(&state.v[i]) {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "block `{name}`: param {:?}, grad {:?}, m {:?}, v {:?}",
                    p.shape(),
                    g.shape(),
                    state.m[i].shape(),
                    state.v[i].shape()
                ),
            ));
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient {
                block: name.to_string(),
            });
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);

    for (i, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *w -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(p: &mut Matrix, g: f64, state: &mut AdamState) {
        let grads = vec![Matrix::filled(p.rows(), p.cols(), g)];
        adam_step(&mut [("p", p)], &grads, state).unwrap();
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Matrix::from_rows(&[vec![1.5, -2.0]]).unwrap();
        let mut state = AdamState::new([&p], 1e-3, 0.9, 0.99);
        step(&mut p, 0.0, &mut state);
        assert_eq!(p.data(), &[1.5, -2.0]);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn first_step_unit_gradient() {
        let mut p = Matrix::scalar(0.0);
        let mut state = AdamState::new([&p], 1e-3, 0.9, 0.99);
        step(&mut p, 1.0, &mut state);
        // m_hat = v_hat = 1 -> delta = -lr / (1 + eps)
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p.get(0, 0) - expected).abs() < 1e-18);
    }

    #[test]
    fn two_steps_match_recurrence() {
        let (lr, b1, b2, eps, g) = (1e-3, 0.9, 0.99, 1e-8, 0.37);
        let mut p = Matrix::scalar(0.5);
        let mut state = AdamState::new([&p], lr, b1, b2);
        step(&mut p, g, &mut state);
        step(&mut p, g, &mut state);

        // closed form after two constant-gradient steps
        let m1 = (1.0 - b1) * g;
        let v1 = (1.0 - b2) * g * g;
        let w1 = 0.5 - lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * g;
        let v2 = b2 * v1 + (1.0 - b2) * g * g;
        let w2 = w1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((p.get(0, 0) - w2).abs() < 1e-12);
        assert_eq!(state.step_count, 2);
    }

    #[test]
    fn nan_gradient_names_block() {
        let mut a = Matrix::scalar(1.0);
        let mut b = Matrix::scalar(2.0);
        let mut state = AdamState::new([&a, &b], 1e-3, 0.9, 0.99);
        let grads = vec![Matrix::scalar(0.1), Matrix::scalar(f64::NAN)];
        let err = adam_step(&mut [("W", &mut a), ("head", &mut b)], &grads, &mut state)
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref block } if block == "head"));
        assert_eq!(state.step_count, 0);
        assert_eq!(a.get(0, 0), 1.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut a = Matrix::zeros(2, 2);
        let mut state = AdamState::new([&a], 1e-3, 0.9, 0.99);
        let grads = vec![Matrix::zeros(2, 1)];
        assert!(adam_step(&mut [("a", &mut a)], &grads, &mut state).is_err());
    }
}
