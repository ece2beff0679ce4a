use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Exact k-nearest-neighbor distance scorer.
#[derive(Debug, Clone)]
pub struct Knn {
    train: Matrix,
    k: usize,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sum of the `k` smallest values, added in ascending order.
fn sum_smallest(mut dists: Vec<f64>, k: usize) -> f64 {
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, f64::total_cmp);
        dists.truncate(k);
    }
    dists.sort_by(f64::total_cmp);
    dists.iter().sum()
}

/// Sum of Euclidean distances from `query` to its `k` nearest rows of `train`.
pub fn knn_score(train: &Matrix, query: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > train.rows() {
        return Err(Error::invalid(format!(
            "k = {k} with {} training windows",
            train.rows()
        )));
    }
    let dists = (0..train.rows()).map(|r| euclidean(train.row(r), query)).collect();
    Ok(sum_smallest(dists, k))
}

impl Knn {
    pub fn fit(train: Matrix, k: usize) -> Result<Self> {
        if k == 0 || k >= train.rows() {
            return Err(Error::invalid(format!(
                "k = {k} needs more than k training windows, got {}",
                train.rows()
            )));
        }
        Ok(Self { train, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn score(&self, query: &[f64]) -> f64 {
        knn_score(&self.train, query, self.k).expect("k validated at fit")
    }

    pub fn score_all(&self, queries: &Matrix) -> Vec<f64> {
        (0..queries.rows())
            .into_par_iter()
            .map(|r| self.score(queries.row(r)))
            .collect()
    }

    /// Leave-one-out scores of the training windows: each window's own row
    /// is excluded from its neighbor search.
    pub fn score_train(&self) -> Vec<f64> {
        (0..self.train.rows())
            .into_par_iter()
            .map(|q| {
                let query = self.train.row(q);
                let dists = (0..self.train.rows())
                    .filter(|&r| r != q)
                    .map(|r| euclidean(self.train.row(r), query))
                    .collect();
                sum_smallest(dists, self.k)
            })
            .collect()
    }
}
