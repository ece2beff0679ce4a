mod common;

use std::time::Instant;

use common::{gradient_errors, random_batch, random_matrix, randomize, rng, small_model};
use glue_core::dataio::WindowBatch;
use glue_core::graph::{build_adjacency, Adjacency, Candidates};
use glue_core::model::ops::predict_distribution;
use glue_core::model::{forecast, forecast_naive, GlueParams, HeadMode, ModelConfig};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn loss_gradient_matches_finite_differences() {
    let start = Instant::now();
    for seed in 0..20 {
        let (params, adj, batch) = small_model(seed);
        for (block, err) in gradient_errors(&params, &adj, &batch, 1e-5) {
            assert!(err < 1e-4, "seed {seed} block {block}: relative error {err:e}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn point_mode_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let mut c = ModelConfig::new(4, 3, 5, 2);
        c.head_mode = HeadMode::Point;
        let mut params = GlueParams::init(c, seed).unwrap();
        let mut r = rng(seed + 50);
        randomize(&mut params, &mut r, 0.8);
        let adj = build_adjacency(&params.embeddings, 2, &Candidates::All).unwrap();
        let batch = random_batch(&mut r, 3, 4, 5);
        for (block, err) in gradient_errors(&params, &adj, &batch, 1e-5) {
            assert!(err < 1e-4, "seed {seed} block {block}: relative error {err:e}");
        }
    }
}

#[test]
fn per_node_attention_gradient_matches_finite_differences() {
    let mut c = ModelConfig::new(3, 4, 5, 2);
    c.per_node_attention = true;
    let mut params = GlueParams::init(c, 3).unwrap();
    let mut r = rng(77);
    randomize(&mut params, &mut r, 0.8);
    let adj = build_adjacency(&params.embeddings, 2, &Candidates::All).unwrap();
    let batch = random_batch(&mut r, 4, 3, 5);
    for (block, err) in gradient_errors(&params, &adj, &batch, 1e-5) {
        assert!(err < 1e-4, "block {block}: relative error {err:e}");
    }
}

#[test]
fn attention_sets_are_normalized() {
    // 1000 forward passes over varied shapes
    for case in 0..1000u64 {
        let mut r = rng(case);
        let n = r.gen_range(1..7);
        let k = r.gen_range(1..n.max(2));
        let mut c = ModelConfig::new(n, r.gen_range(1..5), r.gen_range(1..6), k);
        c.per_node_attention = r.gen_bool(0.3);
        let params = GlueParams::init(c.clone(), case).unwrap();
        let adj = build_adjacency(&params.embeddings, k, &Candidates::All).unwrap();
        let batch = random_batch(&mut r, 2, n, c.w);
        let fc = forecast(&params, &adj, &batch).unwrap();
        for b in 0..batch.len() {
            for i in 0..n {
                let w = fc.attention_set(b, i);
                assert_eq!(w.len(), adj.neighbors(i).len() + 1);
                assert!(w.iter().all(|&x| x >= 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "case {case}");
            }
        }
    }
}

#[test]
fn batched_forecast_matches_per_sensor_evaluation() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let n = r.gen_range(2..7);
        let mut c = ModelConfig::new(n, 5, 4, r.gen_range(1..n));
        if seed % 2 == 1 {
            c.head_mode = HeadMode::Point;
        }
        let params = GlueParams::init(c.clone(), seed).unwrap();
        let adj = build_adjacency(&params.embeddings, c.k, &Candidates::All).unwrap();
        let batch = random_batch(&mut r, 6, n, 4);
        let a = forecast(&params, &adj, &batch).unwrap();
        let b = forecast_naive(&params, &adj, &batch).unwrap();
        for (x, y) in a.mu.data().iter().zip(b.mu.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        match (&a.sigma2, &b.sigma2) {
            (Some(s), Some(t)) => {
                for (x, y) in s.data().iter().zip(t.data()) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
            (None, None) => assert_eq!(c.head_mode, HeadMode::Point),
            _ => panic!("variance presence differs"),
        }
        assert_eq!(a.point(), &a.mu);
    }
}

fn permute_batch(batch: &WindowBatch, perm: &[usize]) -> WindowBatch {
    // new sensor p holds old sensor perm[p]
    let (n, w) = (batch.n_sensors, batch.w);
    let mut inputs = Vec::with_capacity(batch.inputs.len());
    for b in 0..batch.len() {
        for &old in perm {
            inputs.extend_from_slice(batch.input(b, old));
        }
    }
    WindowBatch {
        n_sensors: n,
        w,
        inputs,
        targets: glue_core::numcore::Matrix::from_fn(batch.len(), n, |b, p| batch.targets.get(b, perm[p])),
        target_times: batch.target_times.clone(),
        target_labels: None,
    }
}

// Equal up to rounding: relabeling changes the order in which each
// neighbour set is summed.
#[test]
fn relabeling_sensors_permutes_forecasts() {
    for seed in 0..5 {
        let mut r = rng(seed + 300);
        let n = 5;
        let c = ModelConfig::new(n, 4, 3, 2);
        let params = GlueParams::init(c, seed).unwrap();
        let adj = build_adjacency(&params.embeddings, 2, &Candidates::All).unwrap();
        let batch = random_batch(&mut r, 3, n, 3);
        let perm = [3, 0, 4, 1, 2];

        let mut p2 = params.clone();
        p2.embeddings = glue_core::numcore::Matrix::from_fn(n, 4, |p, c| params.embeddings.get(perm[p], c));
        let mut adj2 = Adjacency::empty(n);
        for p in 0..n {
            for q in 0..n {
                adj2.set_edge(p, q, adj.has_edge(perm[p], perm[q]));
            }
        }
        let a = forecast(&params, &adj, &batch).unwrap();
        let b = forecast(&p2, &adj2, &permute_batch(&batch, &perm)).unwrap();
        for k in 0..batch.len() {
            for p in 0..n {
                assert!((b.mu.get(k, p) - a.mu.get(k, perm[p])).abs() < 1e-12);
                let (s, t) = (b.sigma2.as_ref().unwrap(), a.sigma2.as_ref().unwrap());
                assert!((s.get(k, p) - t.get(k, perm[p])).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn single_sensor_reduces_to_mlp() {
    let c = ModelConfig::new(1, 3, 4, 1);
    let params = GlueParams::init(c, 5).unwrap();
    let adj = Adjacency::empty(1);
    let batch = random_batch(&mut rng(8), 4, 1, 4);
    let fc = forecast(&params, &adj, &batch).unwrap();
    let (w, v) = (&params.projection, params.embeddings.row(0));
    for b in 0..batch.len() {
        // hand-built: z = ReLU(W x), h = ReLU(H (v*z) + c), mu = m.h + m0
        let x = batch.input(b, 0);
        let z: Vec<f64> = (0..3)
            .map(|r| (0..4).map(|c| w.get(r, c) * x[c]).sum::<f64>().max(0.0))
            .collect();
        let u: Vec<f64> = (0..3).map(|i| v[i] * z[i]).collect();
        let hid = &params.head.hidden[0];
        let h: Vec<f64> = (0..3)
            .map(|o| ((0..3).map(|i| u[i] * hid.weight.get(i, o)).sum::<f64>() + hid.bias.get(0, o)).max(0.0))
            .collect();
        let mu = (0..3).map(|i| h[i] * params.head.mu.weight.get(i, 0)).sum::<f64>() + params.head.mu.bias.get(0, 0);
        assert!((fc.mu.get(b, 0) - mu).abs() < 1e-12);
        assert_eq!(fc.attention_set(b, 0), vec![1.0]);
    }
}

#[test]
fn identical_windows_give_identical_outputs() {
    let c = ModelConfig::new(4, 4, 3, 2);
    let params = GlueParams::init(c, 2).unwrap();
    let adj = build_adjacency(&params.embeddings, 2, &Candidates::All).unwrap();
    let one = random_batch(&mut rng(4), 1, 4, 3);
    let batch = WindowBatch {
        inputs: one.inputs.repeat(5),
        targets: glue_core::numcore::Matrix::from_fn(5, 4, |_, c| one.targets.get(0, c)),
        target_times: (0..5).collect(),
        ..one.clone()
    };
    let fc = forecast(&params, &adj, &batch).unwrap();
    for b in 1..5 {
        assert_eq!(fc.mu.row(b), fc.mu.row(0));
    }
}

#[test]
fn variance_never_below_floor() {
    let mut r = rng(11);
    let c = ModelConfig::new(2, 6, 3, 1);
    let mut params = GlueParams::init(c, 1).unwrap();
    // push the variance head strongly negative
    let s = params.head.s.as_mut().unwrap();
    s.bias.set(0, 0, -60.0);
    for _ in 0..10_000 {
        let v: Vec<f64> = (0..6).map(|_| r.gen_range(-5.0..5.0)).collect();
        let z: Vec<f64> = (0..6).map(|_| r.gen_range(0.0..5.0)).collect();
        let p = predict_distribution(&v, &z, &params.head);
        assert!(p.sigma2.unwrap() >= params.head.sigma_floor);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forecast_is_deterministic(seed in any::<u64>(), n in 2usize..6) {
        let c = ModelConfig::new(n, 3, 4, 1);
        let params = GlueParams::init(c, seed).unwrap();
        let adj = build_adjacency(&params.embeddings, 1, &Candidates::All).unwrap();
        let batch = random_batch(&mut rng(seed), 3, n, 4);
        let a = forecast(&params, &adj, &batch).unwrap();
        let b = forecast(&params, &adj, &batch).unwrap();
        prop_assert_eq!(a.mu, b.mu);
        prop_assert_eq!(a.sigma2, b.sigma2);
    }

    #[test]
    fn scores_match_dot_product(seed in any::<u64>(), d in 1usize..6) {
        let mut r = rng(seed);
        let gi = random_matrix(&mut r, 1, 2 * d, 2.0);
        let gj = random_matrix(&mut r, 1, 2 * d, 2.0);
        let a = random_matrix(&mut r, 1, 4 * d, 2.0);
        let dot: f64 = gi.data().iter().chain(gj.data()).zip(a.data()).map(|(x, y)| x * y).sum();
        let want = if dot >= 0.0 { dot } else { 0.2 * dot };
        let got = glue_core::model::ops::attention_score(gi.data(), gj.data(), a.data(), 0.2);
        prop_assert!((got - want).abs() < 1e-12);
    }
}
