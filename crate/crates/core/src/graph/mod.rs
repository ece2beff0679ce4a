//! Sensor embeddings and the top-k cosine dependency graph built from them.
//!
//! Edge `j -> i` (`A[j][i] = 1`) means sensor `j`'s history feeds sensor
//! `i`'s forecast. Self-loops are never stored; attention adds the node
//! itself separately.

mod export;

use serde::{Deserialize, Serialize};

pub use export::{export_embeddings, export_graph, EmbeddingExport};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// When the adjacency is rebuilt from the embeddings during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshSchedule {
    #[default]
    PerEpoch,
    PerStep,
    Once,
}

/// Candidate neighbor sets `C_i`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Candidates {
    /// Every other sensor.
    #[default]
    All,
    /// Explicit per-sensor sets; self entries are ignored.
    Restricted(Vec<Vec<usize>>),
}

impl Candidates {
    pub fn for_node(&self, i: usize, n: usize) -> Vec<usize> {
        match self {
            Candidates::All => (0..n).filter(|&j| j != i).collect(),
            Candidates::Restricted(sets) => {
                let mut c: Vec<usize> = sets
                    .get(i)
                    .map(|s| s.iter().copied().filter(|&j| j != i && j < n).collect())
                    .unwrap_or_default();
                c.sort_unstable();
                c.dedup();
                c
            }
        }
    }
}

/// Dense `N x N` directed adjacency, `A[j][i]` stored at `j * N + i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    n: usize,
    bits: Vec<bool>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.bits[src * self.n + dst]
    }

    pub fn set_edge(&mut self, src: usize, dst: usize, on: bool) {
        self.bits[src * self.n + dst] = on;
    }

    /// Inbound neighbors of `i` in ascending index order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.has_edge(j, i)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// All edges `(src, dst)` ordered by destination, then source.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.neighbors(i).into_iter().map(move |j| (j, i)))
            .collect()
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Cosine similarity between embedding rows, rejecting zero-norm rows.
pub fn embedding_cosine(v: &Matrix, i: usize, j: usize) -> Result<f64> {
    for s in [i, j] {
        if v.row(s).iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroNorm(s));
        }
    }
    Ok(cosine_similarity(v.row(i), v.row(j)))
}

/// Keeps, for each node `i`, the `k` candidates with the largest cosine
/// similarity to `i`. Ties go to the lower sensor index.
pub fn build_adjacency(v: &Matrix, k: usize, candidates: &Candidates) -> Result<Adjacency> {
    let n = v.rows();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if v.cols() == 0 {
        return Err(Error::invalid("embedding dimension must be at least 1"));
    }
    if let Some(i) = (0..n).find(|&i| v.row(i).iter().all(|&x| x == 0.0)) {
        return Err(Error::ZeroNorm(i));
    }
    let mut adj = Adjacency::empty(n);
    for i in 0..n {
        let cand = candidates.for_node(i, n);
        if cand.is_empty() {
            if n == 1 {
                continue;
            }
            return Err(Error::EmptyCandidates(i));
        }
        let mut scored: Vec<(f64, usize)> = cand
            .into_iter()
            .map(|j| (cosine_similarity(v.row(i), v.row(j)), j))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, j) in scored.iter().take(k) {
            adj.set_edge(j, i, true);
        }
    }
    Ok(adj)
}

/// Embeddings plus the adjacency derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorGraph {
    pub embeddings: Matrix,
    pub adjacency: Adjacency,
    pub k: usize,
    pub candidates: Candidates,
}

impl SensorGraph {
    pub fn build(embeddings: Matrix, k: usize, candidates: Candidates) -> Result<Self> {
        let adjacency = build_adjacency(&embeddings, k, &candidates)?;
        Ok(Self {
            embeddings,
            adjacency,
            k,
            candidates,
        })
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.adjacency.neighbors(i)
    }
}
