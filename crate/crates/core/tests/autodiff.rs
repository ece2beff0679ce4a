mod common;

use common::{random_matrix, rng};
use glue_core::numcore::{finite_difference_grad, softmax_rows, Matrix, NodeId, Tape};
use glue_core::training::gaussian_nll;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Builds a scalar root from leaves; the graph shape is fixed per case.
type Build = fn(&mut Tape, &[NodeId]) -> NodeId;

fn check_op(name: &str, inputs: Vec<Matrix>, build: Build) {
    let mut tape = Tape::new();
    let leaves: Vec<NodeId> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
    let root = build(&mut tape, &leaves);
    let grads = tape.backward(root).unwrap();
    for (k, x) in inputs.iter().enumerate() {
        let fd = finite_difference_grad(
            |probe| {
                let mut t = Tape::new();
                let ls: Vec<NodeId> = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, m)| t.leaf(if j == k { probe.clone() } else { m.clone() }))
                    .collect();
                let r = build(&mut t, &ls);
                t.value(r).data()[0]
            },
            x,
            1e-5,
        );
        let g = grads.get_or_zeros(leaves[k], x);
        for (a, b) in g.data().iter().zip(fd.data()) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
            assert!(rel < 1e-4, "{name}: input {k}: tape {a} vs fd {b}");
        }
    }
}

/// Entries bounded away from zero so kinks and log singularities are not
/// probed by the finite differences.
fn away_from_zero(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let m = rng.gen_range(0.2..2.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

fn positive(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(0.3..3.0))
}

// Every root is reduced with a random-weighted sum so all output entries
// contribute different amounts.
fn weighted_sum(t: &mut Tape, x: NodeId, weights: NodeId) -> NodeId {
    let p = t.mul(x, weights).unwrap();
    t.sum(p).unwrap()
}

#[test]
fn every_op_matches_finite_differences() {
    for case in 0..100u64 {
        let mut r = rng(case);
        let (m, n, p) = (r.gen_range(1..5), r.gen_range(1..5), r.gen_range(1..5));
        let a = random_matrix(&mut r, m, n, 1.5);
        let b = random_matrix(&mut r, n, p, 1.5);
        let same = random_matrix(&mut r, m, n, 1.5);
        let wmn = random_matrix(&mut r, m, n, 1.0);
        let wmp = random_matrix(&mut r, m, p, 1.0);

        check_op("matmul", vec![a.clone(), b.clone(), wmp.clone()], |t, l| {
            let y = t.matmul(l[0], l[1]).unwrap();
            weighted_sum(t, y, l[2])
        });
        check_op("add", vec![a.clone(), same.clone(), wmn.clone()], |t, l| {
            let y = t.add(l[0], l[1]).unwrap();
            weighted_sum(t, y, l[2])
        });
        check_op("sub", vec![a.clone(), same.clone(), wmn.clone()], |t, l| {
            let y = t.sub(l[0], l[1]).unwrap();
            weighted_sum(t, y, l[2])
        });
        check_op("elementwise-mul", vec![a.clone(), same.clone(), wmn.clone()], |t, l| {
            let y = t.mul(l[0], l[1]).unwrap();
            weighted_sum(t, y, l[2])
        });
        check_op("div", vec![a.clone(), positive(&mut r, m, n), wmn.clone()], |t, l| {
            let y = t.div(l[0], l[1]).unwrap();
            weighted_sum(t, y, l[2])
        });
        let wcat = random_matrix(&mut r, m, 2 * n, 1.0);
        check_op("concat", vec![a.clone(), same.clone(), wcat], |t, l| {
            let y = t.concat(&[l[0], l[1]]).unwrap();
            weighted_sum(t, y, l[2])
        });
        let kinked = away_from_zero(&mut r, m, n);
        check_op("leaky-relu", vec![kinked.clone(), wmn.clone()], |t, l| {
            let y = t.leaky_relu(l[0], 0.2).unwrap();
            weighted_sum(t, y, l[1])
        });
        check_op("relu", vec![kinked, wmn.clone()], |t, l| {
            let y = t.relu(l[0]).unwrap();
            weighted_sum(t, y, l[1])
        });
        check_op("softplus", vec![a.clone(), wmn.clone()], |t, l| {
            let y = t.softplus(l[0]).unwrap();
            weighted_sum(t, y, l[1])
        });
        check_op("exp", vec![a.clone(), wmn.clone()], |t, l| {
            let y = t.exp(l[0]).unwrap();
            weighted_sum(t, y, l[1])
        });
        check_op("log", vec![positive(&mut r, m, n), wmn.clone()], |t, l| {
            let y = t.log(l[0]).unwrap();
            weighted_sum(t, y, l[1])
        });
        check_op("square", vec![a.clone(), wmn.clone()], |t, l| {
            let y = t.square(l[0]).unwrap();
            weighted_sum(t, y, l[1])
        });
        check_op("reduce-sum", vec![a.clone()], |t, l| {
            let s = t.square(l[0]).unwrap();
            t.sum(s).unwrap()
        });
        check_op("softmax-row", vec![a.clone(), wmn.clone()], |t, l| {
            let y = t.softmax_rows(l[0]).unwrap();
            weighted_sum(t, y, l[1])
        });
        let row = random_matrix(&mut r, 1, n, 1.0);
        check_op("add-row", vec![a.clone(), row, wmn.clone()], |t, l| {
            let y = t.add_row(l[0], l[1]).unwrap();
            weighted_sum(t, y, l[2])
        });
        let col = random_matrix(&mut r, m, 1, 1.0);
        check_op("mul-col", vec![a.clone(), col, wmn.clone()], |t, l| {
            let y = t.mul_col(l[0], l[1]).unwrap();
            weighted_sum(t, y, l[2])
        });
        let wt = random_matrix(&mut r, n, m, 1.0);
        check_op("transpose", vec![a.clone(), wt], |t, l| {
            let y = t.transpose(l[0]).unwrap();
            weighted_sum(t, y, l[1])
        });
    }
}

#[test]
fn gaussian_nll_graph_matches_finite_differences() {
    for case in 0..20u64 {
        let mut r = rng(1000 + case);
        let (b, n) = (r.gen_range(1..6), r.gen_range(1..6));
        let mu = random_matrix(&mut r, b, n, 2.0);
        let s = random_matrix(&mut r, b, n, 2.0);
        let y = random_matrix(&mut r, b, n, 2.0);
        // NLL with sigma2 = softplus(s) + floor, recorded from primitive ops
        check_op("gaussian-nll", vec![mu, s, y], |t, l| {
            let sp = t.softplus(l[1]).unwrap();
            let var = t.add_scalar(sp, 1e-6).unwrap();
            let lg = t.log(var).unwrap();
            let d = t.sub(l[2], l[0]).unwrap();
            let d2 = t.square(d).unwrap();
            let q = t.div(d2, var).unwrap();
            let tot = t.add(lg, q).unwrap();
            let sum = t.sum(tot).unwrap();
            t.scale(sum, 0.5).unwrap()
        });
    }
}

#[test]
fn nll_identities() {
    let mut r = rng(42);
    let mu = random_matrix(&mut r, 7, 4, 2.0);
    let y = random_matrix(&mut r, 7, 4, 2.0);
    let ones = Matrix::filled(7, 4, 1.0);
    let nll = gaussian_nll(&mu, &ones, &y).unwrap();
    let mse = glue_core::training::mse_loss(&mu, &y).unwrap();
    // summed over 4 sensors, averaged over the batch
    assert!((nll - 0.5 * mse * 4.0).abs() < 1e-12);
    assert_eq!(glue_core::training::mse_loss(&y, &y).unwrap(), 0.0);
}

#[test]
fn tape_replay_is_bitwise() {
    let mut r = rng(9);
    let mut t = Tape::new();
    let a = t.leaf(random_matrix(&mut r, 3, 4, 1.0));
    let b = t.leaf(random_matrix(&mut r, 4, 2, 1.0));
    let c = t.matmul(a, b).unwrap();
    let d = t.softplus(c).unwrap();
    let e = t.softmax_rows(d).unwrap();
    let f = t.log(e).unwrap();
    let _ = t.sum(f).unwrap();
    assert!(t.replay_matches().unwrap());
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(
        rows in 1usize..6,
        cols in 1usize..8,
        seed in any::<u64>(),
        scale in 0.1f64..50.0,
    ) {
        let mut r = rng(seed);
        let m = random_matrix(&mut r, rows, cols, scale);
        let s = softmax_rows(&m);
        for i in 0..rows {
            let row = s.row(i);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
