use crate::dataio::WindowBatch;
use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::model::ops::{aggregate, attention_score, attention_weights, node_feature, predict_distribution};
use crate::model::{GlueParams, HeadMode};
use crate::numcore::{Matrix, NodeId, Tape};

/// Fixed-width attention slots per sensor: slot 0 is the sensor itself,
/// then its inbound neighbors in ascending order, then padding.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayout {
    pub n: usize,
    pub slots: usize,
    /// Source sensor per `(i, slot)`; padding points back at `i`.
    pub src: Vec<usize>,
    pub valid: Vec<bool>,
}

impl AttentionLayout {
    pub fn new(adjacency: &Adjacency) -> Self {
        let n = adjacency.n();
        let nbrs: Vec<Vec<usize>> = (0..n).map(|i| adjacency.neighbors(i)).collect();
        let slots = 1 + nbrs.iter().map(Vec::len).max().unwrap_or(0);
        let mut src = Vec::with_capacity(n * slots);
        let mut valid = Vec::with_capacity(n * slots);
        for (i, nb) in nbrs.iter().enumerate() {
            src.push(i);
            valid.push(true);
            for s in 0..slots - 1 {
                match nb.get(s) {
                    Some(&j) => {
                        src.push(j);
                        valid.push(true);
                    }
                    None => {
                        src.push(i);
                        valid.push(false);
                    }
                }
            }
        }
        Self {
            n,
            slots,
            src,
            valid,
        }
    }

    pub fn has_padding(&self) -> bool {
        self.valid.iter().any(|v| !v)
    }

    /// Attention set of sensor `i` (self first).
    pub fn set(&self, i: usize) -> Vec<usize> {
        (0..self.slots)
            .filter(|&s| self.valid[i * self.slots + s])
            .map(|s| self.src[i * self.slots + s])
            .collect()
    }
}

/// Tape handles produced by [`forward`].
#[derive(Debug, Clone)]
pub struct ForwardNodes {
    /// One leaf per parameter block, in [`GlueParams::blocks`] order.
    pub params: Vec<NodeId>,
    /// `B x N` means.
    pub mu: NodeId,
    /// `B x N` variances (Gaussian mode).
    pub sigma2: Option<NodeId>,
    /// `(B*N) x slots` attention weights.
    pub alpha: NodeId,
}

fn check_batch(params: &GlueParams, layout: &AttentionLayout, batch: &WindowBatch) -> Result<()> {
    let c = &params.config;
    if batch.n_sensors != c.n_sensors || batch.w != c.w || layout.n != c.n_sensors {
        return Err(Error::shape(
            "forward",
            format!(
                "model expects {} sensors x w={}, batch has {} x w={}, graph has {} nodes",
                c.n_sensors, c.w, batch.n_sensors, batch.w, layout.n
            ),
        ));
    }
    Ok(())
}

/// Records the batched forward pass on `tape`.
pub fn forward(
    tape: &mut Tape,
    params: &GlueParams,
    layout: &AttentionLayout,
    batch: &WindowBatch,
) -> Result<ForwardNodes> {
    check_batch(params, layout, batch)?;
    let cfg = &params.config;
    let (n, d, slots) = (cfg.n_sensors, cfg.d, layout.slots);
    let b = batch.len();
    let bn = b * n;

    let leaves: Vec<NodeId> = params
        .blocks()
        .into_iter()
        .map(|(_, m)| tape.leaf(m.clone()))
        .collect();
    let (v, w, a) = (leaves[0], leaves[1], leaves[2]);
    let mut cursor = 3;

    let x = tape.leaf(batch.input_matrix());
    let wt = tape.transpose(w)?;
    let h = tape.matmul(x, wt)?; // bn x d
    let vt = tape.gather_rows(v, (0..bn).map(|r| r % n).collect())?;
    let g = tape.concat(&[vt, h])?; // bn x 2d

    let mut row_i = Vec::with_capacity(bn * slots);
    let mut row_j = Vec::with_capacity(bn * slots);
    for r in 0..bn {
        let (base, i) = (r - r % n, r % n);
        for s in 0..slots {
            row_i.push(r);
            row_j.push(base + layout.src[i * slots + s]);
        }
    }

    let pair = if cfg.per_node_attention {
        let node_of_pair: Vec<usize> = row_i.iter().map(|r| r % n).collect();
        let a_top = tape.slice_cols(a, 0, 2 * d)?;
        let a_bot = tape.slice_cols(a, 2 * d, 4 * d)?;
        let a_top = tape.gather_rows(a_top, node_of_pair.clone())?;
        let a_bot = tape.gather_rows(a_bot, node_of_pair)?;
        let gi = tape.gather_rows(g, row_i)?;
        let gj = tape.gather_rows(g, row_j.clone())?;
        let si = tape.mul(gi, a_top)?;
        let si = tape.sum_cols(si)?;
        let sj = tape.mul(gj, a_bot)?;
        let sj = tape.sum_cols(sj)?;
        tape.add(si, sj)?
    } else {
        let a_top = tape.gather_rows(a, (0..2 * d).collect())?;
        let a_bot = tape.gather_rows(a, (2 * d..4 * d).collect())?;
        let si = tape.matmul(g, a_top)?;
        let sj = tape.matmul(g, a_bot)?;
        let si = tape.gather_rows(si, row_i)?;
        let sj = tape.gather_rows(sj, row_j.clone())?;
        tape.add(si, sj)?
    };
    let pi = tape.leaky_relu(pair, cfg.leaky_slope)?;
    let mut scores = tape.reshape(pi, bn, slots)?;
    if layout.has_padding() {
        let mask = Matrix::from_fn(bn, slots, |r, s| {
            if layout.valid[(r % n) * slots + s] {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        });
        let mask = tape.leaf(mask);
        scores = tape.add(scores, mask)?;
    }
    let alpha = tape.softmax_rows(scores)?;
    let alpha_flat = tape.reshape(alpha, bn * slots, 1)?;
    let hj = tape.gather_rows(h, row_j)?;
    let weighted = tape.mul_col(hj, alpha_flat)?;
    let agg = tape.segment_sum(weighted, slots)?;
    let z = tape.relu(agg)?;

    let mut cur = tape.mul(vt, z)?;
    for _ in &params.head.hidden {
        let (wl, bl) = (leaves[cursor], leaves[cursor + 1]);
        cursor += 2;
        let lin = tape.matmul(cur, wl)?;
        let lin = tape.add_row(lin, bl)?;
        cur = tape.relu(lin)?;
    }
    let (mw, mb) = (leaves[cursor], leaves[cursor + 1]);
    cursor += 2;
    let mu = tape.matmul(cur, mw)?;
    let mu = tape.add_row(mu, mb)?;
    let mu = tape.reshape(mu, b, n)?;

    let sigma2 = match cfg.head_mode {
        HeadMode::Gaussian => {
            let (sw, sb) = (leaves[cursor], leaves[cursor + 1]);
            let s = tape.matmul(cur, sw)?;
            let s = tape.add_row(s, sb)?;
            let sp = tape.softplus(s)?;
            let s2 = tape.add_scalar(sp, cfg.sigma_floor)?;
            Some(tape.reshape(s2, b, n)?)
        }
        HeadMode::Point => None,
    };

    Ok(ForwardNodes {
        params: leaves,
        mu,
        sigma2,
        alpha,
    })
}

/// Per-sensor forecast for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDistribution {
    pub mu: Vec<f64>,
    pub sigma2: Option<Vec<f64>>,
    pub point: Vec<f64>,
}

/// Forecasts for a whole batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// `B x N`.
    pub mu: Matrix,
    pub sigma2: Option<Matrix>,
    /// `(B*N) x slots`, rows ordered `(b, sensor)`, columns follow the layout.
    pub attention: Matrix,
    pub layout: AttentionLayout,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.mu.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.rows() == 0
    }

    /// `ŝ = μ`.
    pub fn point(&self) -> &Matrix {
        &self.mu
    }

    pub fn distribution(&self, b: usize) -> ForecastDistribution {
        let mu = self.mu.row(b).to_vec();
        ForecastDistribution {
            point: mu.clone(),
            mu,
            sigma2: self.sigma2.as_ref().map(|s| s.row(b).to_vec()),
        }
    }

    /// Attention weights of sensor `i` in window `b` over its attention set.
    pub fn attention_set(&self, b: usize, i: usize) -> Vec<f64> {
        let row = self.attention.row(b * self.layout.n + i);
        (0..self.layout.slots)
            .filter(|&s| self.layout.valid[i * self.layout.slots + s])
            .map(|s| row[s])
            .collect()
    }
}

const CHUNK: usize = 512;

/// Evaluates the model on every window of `batch`.
pub fn forecast(params: &GlueParams, adjacency: &Adjacency, batch: &WindowBatch) -> Result<Forecast> {
    let layout = AttentionLayout::new(adjacency);
    let n = params.config.n_sensors;
    let mut mu = Vec::with_capacity(batch.len() * n);
    let mut sigma2 = Vec::new();
    let mut attention = Vec::with_capacity(batch.len() * n * layout.slots);
    let indices: Vec<usize> = (0..batch.len()).collect();
    for chunk in indices.chunks(CHUNK) {
        let sub = if chunk.len() == batch.len() {
            batch.clone()
        } else {
            batch.subset(chunk)
        };
        let mut tape = Tape::new();
        let nodes = forward(&mut tape, params, &layout, &sub)?;
        mu.extend_from_slice(tape.value(nodes.mu).data());
        if let Some(s) = nodes.sigma2 {
            sigma2.extend_from_slice(tape.value(s).data());
        }
        attention.extend_from_slice(tape.value(nodes.alpha).data());
    }
    let b = batch.len();
    Ok(Forecast {
        mu: Matrix::from_vec(b, n, mu)?,
        sigma2: match params.config.head_mode {
            HeadMode::Gaussian => Some(Matrix::from_vec(b, n, sigma2)?),
            HeadMode::Point => None,
        },
        attention: Matrix::from_vec(b * n, layout.slots, attention)?,
        layout,
    })
}

/// The same forecast computed sensor by sensor from the single-node
/// operations, without the tape.
pub fn forecast_naive(
    params: &GlueParams,
    adjacency: &Adjacency,
    batch: &WindowBatch,
) -> Result<Forecast> {
    let layout = AttentionLayout::new(adjacency);
    check_batch(params, &layout, batch)?;
    let cfg = &params.config;
    let n = cfg.n_sensors;
    let b = batch.len();
    let gaussian = cfg.head_mode == HeadMode::Gaussian;
    let mut mu = Matrix::zeros(b, n);
    let mut sigma2 = Matrix::zeros(b, n);
    let mut attention = Matrix::zeros(b * n, layout.slots);
    for k in 0..b {
        let feats: Vec<Vec<f64>> = (0..n)
            .map(|i| node_feature(params.embeddings.row(i), batch.input(k, i), &params.projection))
            .collect::<Result<_>>()?;
        for i in 0..n {
            let a = params.attention_for(i);
            let set = layout.set(i);
            let scores: Vec<f64> = set
                .iter()
                .map(|&j| attention_score(&feats[i], &feats[j], &a, cfg.leaky_slope))
                .collect();
            let alpha = attention_weights(&scores);
            let histories: Vec<&[f64]> = set.iter().map(|&j| batch.input(k, j)).collect();
            let z = aggregate(&alpha, &params.projection, &histories)?;
            let p = predict_distribution(params.embeddings.row(i), &z, &params.head);
            mu.set(k, i, p.mu);
            if let Some(s) = p.sigma2 {
                sigma2.set(k, i, s);
            }
            for (s, w) in alpha.iter().enumerate() {
                attention.set(k * n + i, s, *w);
            }
        }
    }
    Ok(Forecast {
        mu,
        sigma2: gaussian.then_some(sigma2),
        attention,
        layout,
    })
}
