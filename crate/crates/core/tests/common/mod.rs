//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness. Nothing here calls into the code under test except to
//! build inputs.
#![allow(dead_code)]

use glue_core::dataio::WindowBatch;
use glue_core::graph::Adjacency;
use glue_core::model::{forward, AttentionLayout, GlueParams, ModelConfig};
use glue_core::numcore::{finite_difference_grad, Matrix, Tape};
use glue_core::training::record_loss;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

/// A batch of `b` random windows with random targets.
pub fn random_batch(rng: &mut ChaCha8Rng, b: usize, n: usize, w: usize) -> WindowBatch {
    WindowBatch {
        n_sensors: n,
        w,
        inputs: (0..b * n * w).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        targets: random_matrix(rng, b, n, 2.0),
        target_times: (0..b).collect(),
        target_labels: None,
    }
}

// ---- graph ------------------------------------------------------------

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Top-k by repeated selection over every pair: the first maximum in index
/// order wins, so ties go to the lower index.
pub fn brute_force_adjacency(v: &Matrix, k: usize) -> Vec<Vec<bool>> {
    let n = v.rows();
    let mut a = vec![vec![false; n]; n];
    for i in 0..n {
        let sims: Vec<f64> = (0..n).map(|j| cos(v.row(i), v.row(j))).collect();
        let mut taken = vec![false; n];
        taken[i] = true;
        for _ in 0..k.min(n - 1) {
            let mut best: Option<usize> = None;
            for j in 0..n {
                if taken[j] {
                    continue;
                }
                if best.is_none_or(|b| sims[j] > sims[b]) {
                    best = Some(j);
                }
            }
            let j = best.unwrap();
            taken[j] = true;
            a[j][i] = true;
        }
    }
    a
}

pub fn adjacency_matrix(adj: &Adjacency) -> Vec<Vec<bool>> {
    let n = adj.n();
    (0..n).map(|j| (0..n).map(|i| adj.has_edge(j, i)).collect()).collect()
}

// ---- robust scoring ---------------------------------------------------

/// Sort-based type-7 quantile.
pub fn quantile_oracle(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Max robust error per row by a plain double loop; ties keep the first
/// sensor.
pub fn mre_double_loop(errors: &Matrix, median: &[f64], iqr: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut scores = Vec::new();
    let mut args = Vec::new();
    for t in 0..errors.rows() {
        let mut best = 0;
        let mut best_v = (errors.get(t, 0) - median[0]) / iqr[0];
        for i in 1..errors.cols() {
            let r = (errors.get(t, i) - median[i]) / iqr[i];
            if r > best_v {
                best_v = r;
                best = i;
            }
        }
        scores.push(best_v);
        args.push(best);
    }
    (scores, args)
}

// ---- linear algebra ---------------------------------------------------

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns the
/// eigenvalues in decreasing order and matching unit eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut vecs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in vecs.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y][y].partial_cmp(&m[x][x]).unwrap());
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|r| vecs[r][i]).collect()).collect();
    (values, vectors)
}

/// Population covariance of the rows of `data`.
pub fn covariance(data: &Matrix) -> Vec<Vec<f64>> {
    let (n, p) = data.shape();
    let mean: Vec<f64> = (0..p).map(|c| data.col_values(c).iter().sum::<f64>() / n as f64).collect();
    (0..p)
        .map(|a| {
            (0..p)
                .map(|b| (0..n).map(|r| (data.get(r, a) - mean[a]) * (data.get(r, b) - mean[b])).sum::<f64>() / n as f64)
                .collect()
        })
        .collect()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least-squares `beta` for `y ≈ Z beta` via the normal equations, one
/// column of `y` at a time. `beta[c][o]` is the weight of regressor `c` for
/// output `o`.
pub fn normal_equations(z: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = z[0].len();
    let outs = y[0].len();
    let gram: Vec<Vec<f64>> = (0..cols)
        .map(|a| (0..cols).map(|b| z.iter().map(|r| r[a] * r[b]).sum()).collect())
        .collect();
    let mut beta = vec![vec![0.0; outs]; cols];
    for o in 0..outs {
        let rhs: Vec<f64> = (0..cols).map(|a| z.iter().zip(y).map(|(r, t)| r[a] * t[o]).sum()).collect();
        for (c, v) in gauss_solve(gram.clone(), rhs).into_iter().enumerate() {
            beta[c][o] = v;
        }
    }
    beta
}

// ---- kNN --------------------------------------------------------------

/// Sum of the `k` smallest Euclidean distances after a full sort.
pub fn knn_exhaustive(train: &Matrix, query: &[f64], k: usize) -> f64 {
    let mut d: Vec<f64> = (0..train.rows())
        .map(|r| {
            let mut s = 0.0;
            for (a, b) in train.row(r).iter().zip(query) {
                s += (a - b) * (a - b);
            }
            s.sqrt()
        })
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    for v in &d[..k] {
        total += v;
    }
    total
}

// ---- model gradients --------------------------------------------------

/// Training loss of `params` on `batch` with a fixed graph.
pub fn model_loss(params: &GlueParams, layout: &AttentionLayout, batch: &WindowBatch) -> f64 {
    let mut tape = Tape::new();
    let nodes = forward(&mut tape, params, layout, batch).unwrap();
    let loss = record_loss(&mut tape, &nodes, &batch.targets).unwrap();
    tape.value(loss).data()[0]
}

/// Per-block `||g - fd|| / max(||g||, ||fd||)` of the tape gradient against
/// central differences with step `eps`.
pub fn gradient_errors(params: &GlueParams, adjacency: &Adjacency, batch: &WindowBatch, eps: f64) -> Vec<(String, f64)> {
    let layout = AttentionLayout::new(adjacency);
    let mut tape = Tape::new();
    let nodes = forward(&mut tape, params, &layout, batch).unwrap();
    let loss = record_loss(&mut tape, &nodes, &batch.targets).unwrap();
    let grads = tape.backward(loss).unwrap();
    let blocks = params.blocks();
    blocks
        .iter()
        .enumerate()
        .map(|(b, (name, value))| {
            let g = grads.get_or_zeros(nodes.params[b], value);
            let fd = finite_difference_grad(
                |probe| {
                    let mut p = params.clone();
                    *p.blocks_mut().swap_remove(b).1 = probe.clone();
                    model_loss(&p, &layout, batch)
                },
                value,
                eps,
            );
            let diff: f64 = g.data().iter().zip(fd.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let scale = g.norm_sq().sqrt().max(fd.norm_sq().sqrt()).max(1e-300);
            (name.clone(), diff / scale)
        })
        .collect()
}

/// Replaces every parameter entry with a uniform draw in `±scale`.
///
/// Gradient checks run at random parameter points rather than at init:
/// init biases are zero, which puts a hidden ReLU exactly on its kink
/// whenever the aggregate is all zero, and central differences there
/// average the two one-sided slopes.
pub fn randomize(params: &mut GlueParams, rng: &mut ChaCha8Rng, scale: f64) {
    for (_, m) in params.blocks_mut() {
        for x in m.data_mut() {
            *x = rng.gen_range(-scale..scale);
        }
    }
}

/// The small model used by the gradient criterion: 3 sensors, d=4, w=5, k=2.
pub fn small_model(seed: u64) -> (GlueParams, Adjacency, WindowBatch) {
    let config = ModelConfig::new(3, 4, 5, 2);
    let mut params = GlueParams::init(config, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    randomize(&mut params, &mut r, 0.8);
    let adjacency = glue_core::graph::build_adjacency(&params.embeddings, 2, &params.config.candidates).unwrap();
    let batch = random_batch(&mut r, 4, 3, 5);
    (params, adjacency, batch)
}
