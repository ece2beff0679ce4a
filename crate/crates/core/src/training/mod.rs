//! Losses and the epoch loop.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{NormStats, WindowBatch};
use crate::error::{Error, Result};
use crate::graph::{build_adjacency, Adjacency, RefreshSchedule};
use crate::model::{forward, AttentionLayout, Checkpoint, ForwardNodes, GlueParams, HeadMode};
use crate::numcore::{adam_step, clip_global_norm, AdamState, Matrix, NodeId, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    /// Set from the run seed, not from configuration files.
    #[serde(skip)]
    pub seed: u64,
    pub refresh: RefreshSchedule,
    pub shuffle: bool,
    /// Global gradient-norm ceiling; `0` disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.99,
            batch_size: 128,
            seed: 0,
            refresh: RefreshSchedule::PerEpoch,
            shuffle: true,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.clip_norm >= 0.0) {
            return bad(format!("clip_norm must be non-negative, got {}", self.clip_norm));
        }
        Ok(())
    }
}

fn check_finite(what: &'static str, m: &Matrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_same(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())))
    }
}

/// `Σ_i [log σ²_i / 2 + (y_i − μ_i)² / (2σ²_i)]`, averaged over rows.
pub fn gaussian_nll(mu: &Matrix, sigma2: &Matrix, y: &Matrix) -> Result<f64> {
    check_same("gaussian_nll", mu, y)?;
    check_same("gaussian_nll", sigma2, y)?;
    check_finite("gaussian_nll mean", mu)?;
    check_finite("gaussian_nll variance", sigma2)?;
    check_finite("gaussian_nll target", y)?;
    if sigma2.data().iter().any(|&s| s <= 0.0) {
        return Err(Error::invalid("gaussian_nll needs positive variances"));
    }
    let total: f64 = mu
        .data()
        .iter()
        .zip(sigma2.data())
        .zip(y.data())
        .map(|((m, s), t)| 0.5 * s.ln() + (t - m) * (t - m) / (2.0 * s))
        .sum();
    Ok(total / y.rows() as f64)
}

/// Mean of `(y − ŝ)²` over every entry.
pub fn mse_loss(point: &Matrix, y: &Matrix) -> Result<f64> {
    check_same("mse_loss", point, y)?;
    let total: f64 = point
        .data()
        .iter()
        .zip(y.data())
        .map(|(p, t)| (t - p) * (t - p))
        .sum();
    Ok(total / y.len() as f64)
}

/// Records the objective for `nodes` against `targets`: Gaussian NLL when a
/// variance head is present, MSE otherwise.
pub fn record_loss(tape: &mut Tape, nodes: &ForwardNodes, targets: &Matrix) -> Result<NodeId> {
    let (b, n) = targets.shape();
    let y = tape.leaf(targets.clone());
    let diff = tape.sub(nodes.mu, y)?;
    let sq = tape.square(diff)?;
    match nodes.sigma2 {
        Some(s2) => {
            let quad = tape.div(sq, s2)?;
            let log = tape.log(s2)?;
            let terms = tape.add(log, quad)?;
            let total = tape.sum(terms)?;
            tape.scale(total, 0.5 / b as f64)
        }
        None => {
            let total = tape.sum(sq)?;
            tape.scale(total, 1.0 / (b * n) as f64)
        }
    }
}

/// Per-epoch results of [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch (window-weighted).
    pub loss_history: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub steps: usize,
    pub checkpoint_path: Option<PathBuf>,
}

impl TrainReport {
    /// `epoch,loss` rows. Timings are kept out so the file is reproducible.
    pub fn write_loss_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        writeln!(f, "epoch,loss")?;
        for (e, l) in self.loss_history.iter().enumerate() {
            writeln!(f, "{},{}", e + 1, l)?;
        }
        Ok(())
    }

    pub fn write_timing_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        writeln!(f, "epoch,seconds")?;
        for (e, s) in self.epoch_seconds.iter().enumerate() {
            writeln!(f, "{},{:.3}", e + 1, s)?;
        }
        Ok(())
    }
}

/// Trained parameters, the adjacency rebuilt from the final embeddings, and
/// the report.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: GlueParams,
    pub adjacency: Adjacency,
    pub report: TrainReport,
}

impl TrainOutcome {
    pub fn checkpoint(&self, sensor_names: Vec<String>, norm_stats: Option<NormStats>, seed: u64) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            adjacency: self.adjacency.clone(),
            sensor_names,
            norm_stats,
            seed,
        }
    }
}

fn rebuild(params: &GlueParams) -> Result<AttentionLayout> {
    let adj = build_adjacency(&params.embeddings, params.config.k, &params.config.candidates)?;
    Ok(AttentionLayout::new(&adj))
}

/// Splits `order` into batches, dropping a trailing batch of one window
/// when other batches exist.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
    }
    out
}

/// Fits `params` to the windows of `data` with Adam.
pub fn train(mut params: GlueParams, data: &WindowBatch, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("no training windows"));
    }
    if data.n_sensors != params.config.n_sensors || data.w != params.config.w {
        return Err(Error::shape(
            "train",
            format!(
                "model for {} sensors x w={}, windows are {} x w={}",
                params.config.n_sensors, params.config.w, data.n_sensors, data.w
            ),
        ));
    }
    let names: Vec<String> = params.blocks().into_iter().map(|(n, _)| n).collect();
    let mut adam = AdamState::new(
        params.blocks().into_iter().map(|(_, m)| m),
        config.lr,
        config.beta1,
        config.beta2,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut layout = rebuild(&params)?;
    let mut report = TrainReport {
        loss_history: Vec::with_capacity(config.epochs),
        epoch_seconds: Vec::with_capacity(config.epochs),
        steps: 0,
        checkpoint_path: None,
    };

    for epoch in 0..config.epochs {
        let start = Instant::now();
        if config.refresh == RefreshSchedule::PerEpoch && epoch > 0 {
            layout = rebuild(&params)?;
        }
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        let mut seen = 0usize;
        for (step, idx) in batches(&order, config.batch_size).into_iter().enumerate() {
            if config.refresh == RefreshSchedule::PerStep && (epoch, step) != (0, 0) {
                layout = rebuild(&params)?;
            }
            let sub = data.subset(idx);
            let mut tape = Tape::new();
            let nodes = forward(&mut tape, &params, &layout, &sub)?;
            let loss = record_loss(&mut tape, &nodes, &sub.targets)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            let grads = tape.backward(loss)?;
            let mut grads: Vec<Matrix> = nodes
                .params
                .iter()
                .map(|&id| grads.get_or_zeros(id, tape.value(id)))
                .collect();
            clip_global_norm(&mut grads, config.clip_norm);
            {
                let mut blocks = params.blocks_mut();
                let mut named: Vec<(&str, &mut Matrix)> = blocks
                    .iter_mut()
                    .zip(&names)
                    .map(|((_, m), name)| (name.as_str(), &mut **m))
                    .collect();
                adam_step(&mut named, &grads, &mut adam)?;
            }
            total += value * idx.len() as f64;
            seen += idx.len();
            report.steps += 1;
        }
        let mean = total / seen as f64;
        let secs = start.elapsed().as_secs_f64();
        log::info!("epoch {}/{}: loss {mean:.6} ({secs:.2}s)", epoch + 1, config.epochs);
        report.loss_history.push(mean);
        report.epoch_seconds.push(secs);
    }

    let adjacency = build_adjacency(&params.embeddings, params.config.k, &params.config.candidates)?;
    Ok(TrainOutcome {
        params,
        adjacency,
        report,
    })
}

/// Convenience: the head mode's objective name for reports.
pub fn objective_name(mode: HeadMode) -> &'static str {
    match mode {
        HeadMode::Gaussian => "gaussian-nll",
        HeadMode::Point => "mse",
    }
}
