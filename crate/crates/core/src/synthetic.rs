//! Generated datasets with known structure, used for demos and checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::RawTable;
use crate::stats::{quantile, sorted_copy};

/// Train/test tables plus the ground truth that generated them.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: RawTable,
    pub test: RawTable,
    /// Planted `(src, dst)` dependencies: `src` at `t-1` drives `dst` at `t`.
    pub edges: Vec<(usize, usize)>,
    /// Innovation variance of each sensor in raw units.
    pub noise_variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedConfig {
    pub train_len: usize,
    pub test_len: usize,
    /// Fraction of rows inside planted anomaly segments, in both splits.
    pub anomaly_rate: f64,
    /// Level shift size in robust standard deviations (IQR / 1.349).
    pub shift: f64,
    pub segment_len: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            train_len: 3000,
            test_len: 2000,
            anomaly_rate: 0.05,
            shift: 6.0,
            segment_len: 20,
            seed: 7,
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn table(names: &[&str], columns: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> RawTable {
    RawTable {
        sensor_names: names.iter().map(|s| s.to_string()).collect(),
        columns,
        labels,
        trajectories: None,
        timestamps: None,
    }
}

/// Five sensors: two autoregressive drivers (0 and 2), two followers
/// (1 from 0, 3 from 2) and a sink (4 from 1 and 3).
fn planted_series(len: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let burn = 50;
    let mut s = vec![vec![0.0; len + burn]; 5];
    for t in 1..len + burn {
        s[0][t] = 0.7 * s[0][t - 1] + gauss(rng);
        s[2][t] = -0.6 * s[2][t - 1] + gauss(rng);
        s[1][t] = 0.9 * s[0][t - 1] + 0.3 * gauss(rng);
        s[3][t] = 0.8 * s[2][t - 1] + 0.3 * gauss(rng);
        s[4][t] = 0.6 * s[1][t - 1] + 0.6 * s[3][t - 1] + 0.3 * gauss(rng);
    }
    s.into_iter().map(|c| c[burn..].to_vec()).collect()
}

/// Adds level-shift segments until `rate` of the rows are covered. Each
/// segment hits one random sensor, up or down.
fn plant_shifts(columns: &mut [Vec<f64>], config: &PlantedConfig, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let len = columns[0].len();
    let robust_sd: Vec<f64> = columns
        .iter()
        .map(|c| {
            let s = sorted_copy(c);
            (quantile(&s, 0.75) - quantile(&s, 0.25)) / 1.349
        })
        .collect();
    let mut labels = vec![0u8; len];
    let target = (config.anomaly_rate * len as f64).round() as usize;
    let seg = config.segment_len.max(1);
    let mut covered = 0;
    let mut attempts = 0;
    while covered + seg <= target && attempts < 10_000 {
        attempts += 1;
        let start = rng.gen_range(config.segment_len..len.saturating_sub(seg));
        // keep a gap so segments never touch
        let lo = start.saturating_sub(seg);
        let hi = (start + 2 * seg).min(len);
        if labels[lo..hi].iter().any(|&l| l != 0) {
            continue;
        }
        let sensor = rng.gen_range(0..columns.len());
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for t in start..start + seg {
            columns[sensor][t] += sign * config.shift * robust_sd[sensor];
            labels[t] = 1;
        }
        covered += seg;
    }
    labels
}

/// Dependency dataset with labelled level-shift anomalies in both splits.
pub fn planted_dependencies(config: &PlantedConfig) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let names = ["s0", "s1", "s2", "s3", "s4"];
    let mut split = |len: usize| {
        let mut cols = planted_series(len, &mut rng);
        let labels = plant_shifts(&mut cols, config, &mut rng);
        table(&names, cols, Some(labels))
    };
    let train = split(config.train_len);
    let test = split(config.test_len);
    SyntheticData {
        train,
        test,
        edges: vec![(0, 1), (2, 3), (1, 4), (3, 4)],
        noise_variance: vec![1.0, 0.09, 1.0, 0.09, 0.09],
    }
}

/// Two sensors with homoscedastic Gaussian innovations of known variance:
/// `x0_t = 0.5 x0_{t-1} + e0`, `x1_t = 0.8 x0_{t-1} + e1`. No anomalies.
pub fn homoscedastic_pair(train_len: usize, test_len: usize, noise_sd: [f64; 2], seed: u64) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = |len: usize| {
        let burn = 50;
        let mut s = vec![vec![0.0; len + burn]; 2];
        for t in 1..len + burn {
            s[0][t] = 0.5 * s[0][t - 1] + noise_sd[0] * gauss(&mut rng);
            s[1][t] = 0.8 * s[0][t - 1] + noise_sd[1] * gauss(&mut rng);
        }
        let cols = s.into_iter().map(|c| c[burn..].to_vec()).collect();
        table(&["x0", "x1"], cols, Some(vec![0; len]))
    };
    let train = split(train_len);
    let test = split(test_len);
    SyntheticData {
        train,
        test,
        edges: vec![(0, 1)],
        noise_variance: noise_sd.iter().map(|s| s * s).collect(),
    }
}

/// Three sensors built from two sinusoids with linear cross-dependencies
/// and a little noise.
pub fn sinusoid_toy(len: usize, seed: u64) -> RawTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(len)).collect();
    for t in 0..len {
        let a = (t as f64 / 8.0).sin();
        let b = (t as f64 / 13.0).cos();
        cols[0].push(a + 0.05 * gauss(&mut rng));
        cols[1].push(0.6 * a + 0.8 * b + 0.05 * gauss(&mut rng));
        let c = cols[0][t] - 0.5 * cols[1][t] + 0.05 * gauss(&mut rng);
        cols[2].push(c);
    }
    table(&["a", "b", "c"], cols, None)
}
