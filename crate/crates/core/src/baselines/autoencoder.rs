use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dense;
use crate::numcore::{adam_step, AdamState, Matrix, NodeId, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    /// Defaults to `ceil(p / 4)` for input width `p`.
    pub bottleneck: Option<usize>,
    /// Width of the hidden layer on each side. Defaults to `ceil(p / 2)`,
    /// never below the bottleneck.
    pub hidden: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            bottleneck: None,
            hidden: None,
            epochs: 25,
            batch_size: 128,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// `p -> hidden (ReLU) -> bottleneck -> hidden (ReLU) -> p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub layers: [Dense; 4],
}

impl Autoencoder {
    pub fn init(p: usize, config: &AutoencoderConfig) -> Result<Self> {
        let bottleneck = config.bottleneck.unwrap_or(p.div_ceil(4));
        if p == 0 || bottleneck == 0 || bottleneck >= p {
            return Err(Error::invalid(format!(
                "bottleneck {bottleneck} must lie in 1..{p}"
            )));
        }
        let hidden = config.hidden.unwrap_or(p.div_ceil(2)).max(bottleneck);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            layers: [
                Dense::init(&mut rng, p, hidden),
                Dense::init(&mut rng, hidden, bottleneck),
                Dense::init(&mut rng, bottleneck, hidden),
                Dense::init(&mut rng, hidden, p),
            ],
        })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.rows()
    }

    fn blocks_mut(&mut self) -> Vec<(&str, &mut Matrix)> {
        let mut out = Vec::with_capacity(8);
        for layer in self.layers.iter_mut() {
            out.push(("ae.weight", &mut layer.weight));
            out.push(("ae.bias", &mut layer.bias));
        }
        out
    }

    /// Records the reconstruction of `x` (rows are samples); returns the
    /// parameter leaves and the output node.
    fn record(&self, tape: &mut Tape, x: NodeId) -> Result<(Vec<NodeId>, NodeId)> {
        let mut leaves = Vec::with_capacity(8);
        let mut h = x;
        for (l, layer) in self.layers.iter().enumerate() {
            let w = tape.leaf(layer.weight.clone());
            let b = tape.leaf(layer.bias.clone());
            leaves.push(w);
            leaves.push(b);
            h = tape.matmul(h, w)?;
            h = tape.add_row(h, b)?;
            // ReLU after each hidden layer; the bottleneck and output are linear
            if l == 0 || l == 2 {
                h = tape.relu(h)?;
            }
        }
        Ok((leaves, h))
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            h = layer.apply(&h);
            if l == 0 || l == 2 {
                h.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        h
    }

    /// Squared reconstruction error.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.reconstruct(x)
            .iter()
            .zip(x)
            .map(|(r, v)| (r - v) * (r - v))
            .sum()
    }

    /// Mean squared error over all rows and columns of `data`.
    pub fn mse(&self, data: &Matrix) -> f64 {
        (0..data.rows()).map(|r| self.score(data.row(r))).sum::<f64>() / data.len() as f64
    }

    /// Trains on the rows of `data` with Adam and MSE. Returns the fitted
    /// model and the mean training loss per epoch.
    pub fn fit(data: &Matrix, config: &AutoencoderConfig) -> Result<(Self, Vec<f64>)> {
        if data.rows() == 0 {
            return Err(Error::invalid("autoencoder needs at least one training window"));
        }
        let mut model = Self::init(data.cols(), config)?;
        let mut adam = AdamState::new(
            model.layers.iter().flat_map(|l| [&l.weight, &l.bias]),
            config.lr,
            0.9,
            0.99,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
        let mut order: Vec<usize> = (0..data.rows()).collect();
        let batch = config.batch_size.max(1);
        let mut history = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (step, idx) in order.chunks(batch).enumerate() {
                let x = data.select_rows(idx);
                let n = x.len() as f64;
                let mut tape = Tape::new();
                let xin = tape.leaf(x);
                let (leaves, out) = model.record(&mut tape, xin)?;
                let diff = tape.sub(out, xin)?;
                let sq = tape.square(diff)?;
                let sum = tape.sum(sq)?;
                let loss = tape.scale(sum, 1.0 / n)?;
                let value = tape.value(loss).data()[0];
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, step });
                }
                let grads = tape.backward(loss)?;
                let grads: Vec<Matrix> = leaves
                    .iter()
                    .map(|&id| grads.get_or_zeros(id, tape.value(id)))
                    .collect();
                adam_step(&mut model.blocks_mut(), &grads, &mut adam)?;
                total += value * idx.len() as f64;
            }
            history.push(total / data.rows() as f64);
        }
        Ok((model, history))
    }
}
