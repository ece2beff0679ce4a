//! Graph-attention forecaster with a Gaussian (or point) output head.
//!
//! For sensor `i` with history `x_i` (length `w`) and embedding `v_i`:
//!
//! ```text
//! g_i      = v_i ⊕ W x_i
//! π(i, j)  = LeakyReLU(aᵀ (g_i ⊕ g_j))            j ∈ N(i) ∪ {i}
//! α_ij     = softmax_j π(i, j)
//! z_i      = ReLU(Σ_j α_ij W x_j)
//! μ, σ²    = f_φ(v_i ⊙ z_i)                        σ² = softplus(s) + floor
//! ```
//!
//! [`forward`] records the whole batch on a [`Tape`](crate::numcore::Tape)
//! in vectorised form; the functions in [`ops`] evaluate the same
//! quantities one sensor at a time.

mod checkpoint;
mod forward;
pub mod ops;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{
    forecast, forecast_naive, forward, AttentionLayout, Forecast, ForecastDistribution, ForwardNodes,
};

use crate::error::{Error, Result};
use crate::graph::Candidates;
use crate::numcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadMode {
    /// Mean and variance, trained by Gaussian NLL.
    #[default]
    Gaussian,
    /// Mean only, trained by MSE (the GDN variant).
    Point,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_sensors: usize,
    pub d: usize,
    pub w: usize,
    pub k: usize,
    pub head_mode: HeadMode,
    pub leaky_slope: f64,
    pub sigma_floor: f64,
    /// Hidden `d -> d` ReLU layers in the output head.
    pub hidden_layers: usize,
    /// One attention vector per sensor instead of a shared one.
    pub per_node_attention: bool,
    pub candidates: Candidates,
}

impl ModelConfig {
    pub fn new(n_sensors: usize, d: usize, w: usize, k: usize) -> Self {
        Self {
            n_sensors,
            d,
            w,
            k,
            head_mode: HeadMode::Gaussian,
            leaky_slope: 0.2,
            sigma_floor: 1e-6,
            hidden_layers: 1,
            per_node_attention: false,
            candidates: Candidates::All,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_sensors == 0 {
            return bad("n_sensors must be at least 1");
        }
        if self.d == 0 || self.w == 0 || self.k == 0 {
            return bad("d, w and k must be at least 1");
        }
        if !(self.sigma_floor > 0.0) {
            return bad("sigma_floor must be positive");
        }
        if !self.leaky_slope.is_finite() {
            return bad("leaky_slope must be finite");
        }
        Ok(())
    }
}

/// Fully connected layer: `y = x · weight + bias`, `weight` is `in x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Dense {
    pub(crate) fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: uniform(rng, fan_in, fan_out, fan_in),
            bias: Matrix::zeros(1, fan_out),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.weight.cols())
            .map(|o| {
                let s: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(k, xk)| xk * self.weight.get(k, o))
                    .sum();
                s + self.bias.get(0, o)
            })
            .collect()
    }
}

/// `f_φ`: hidden ReLU layers feeding a mean head and, in Gaussian mode, a
/// variance head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub hidden: Vec<Dense>,
    pub mu: Dense,
    pub s: Option<Dense>,
    pub sigma_floor: f64,
}

/// All trainable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlueParams {
    pub config: ModelConfig,
    /// `N x d` sensor embeddings.
    pub embeddings: Matrix,
    /// `d x w` shared input projection.
    pub projection: Matrix,
    /// `4d x 1` shared attention vector, or `N x 4d` when per-node.
    pub attention: Matrix,
    pub head: OutputHead,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Matrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
}

impl GlueParams {
    /// Seeded initialisation: entries uniform in `±1/sqrt(fan_in)`, biases
    /// zero. Embeddings use `fan_in = d`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, d, w) = (config.n_sensors, config.d, config.w);
        let embeddings = uniform(&mut rng, n, d, d);
        let projection = uniform(&mut rng, d, w, w);
        let attention = if config.per_node_attention {
            uniform(&mut rng, n, 4 * d, 4 * d)
        } else {
            uniform(&mut rng, 4 * d, 1, 4 * d)
        };
        let hidden = (0..config.hidden_layers)
            .map(|_| Dense::init(&mut rng, d, d))
            .collect();
        let mu = Dense::init(&mut rng, d, 1);
        let s = (config.head_mode == HeadMode::Gaussian).then(|| Dense::init(&mut rng, d, 1));
        let head = OutputHead {
            hidden,
            mu,
            s,
            sigma_floor: config.sigma_floor,
        };
        Ok(Self {
            config,
            embeddings,
            projection,
            attention,
            head,
        })
    }

    /// Parameter blocks in a fixed order with stable names.
    pub fn blocks(&self) -> Vec<(String, &Matrix)> {
        let mut out: Vec<(String, &Matrix)> = vec![
            ("V".into(), &self.embeddings),
            ("W".into(), &self.projection),
            ("a".into(), &self.attention),
        ];
        for (l, layer) in self.head.hidden.iter().enumerate() {
            out.push((format!("head.hidden{l}.weight"), &layer.weight));
            out.push((format!("head.hidden{l}.bias"), &layer.bias));
        }
        out.push(("head.mu.weight".into(), &self.head.mu.weight));
        out.push(("head.mu.bias".into(), &self.head.mu.bias));
        if let Some(s) = &self.head.s {
            out.push(("head.s.weight".into(), &s.weight));
            out.push(("head.s.bias".into(), &s.bias));
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out: Vec<(String, &mut Matrix)> = vec![
            ("V".into(), &mut self.embeddings),
            ("W".into(), &mut self.projection),
            ("a".into(), &mut self.attention),
        ];
        for (l, layer) in self.head.hidden.iter_mut().enumerate() {
            out.push((format!("head.hidden{l}.weight"), &mut layer.weight));
            out.push((format!("head.hidden{l}.bias"), &mut layer.bias));
        }
        out.push(("head.mu.weight".into(), &mut self.head.mu.weight));
        out.push(("head.mu.bias".into(), &mut self.head.mu.bias));
        if let Some(s) = &mut self.head.s {
            out.push(("head.s.weight".into(), &mut s.weight));
            out.push(("head.s.bias".into(), &mut s.bias));
        }
        out
    }

    /// Attention vector used by sensor `i` (length `4d`).
    pub fn attention_for(&self, i: usize) -> Vec<f64> {
        if self.config.per_node_attention {
            self.attention.row(i).to_vec()
        } else {
            self.attention.data().to_vec()
        }
    }
}
