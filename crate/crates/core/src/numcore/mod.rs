//! Dense matrices, a reverse-mode tape over them, and Adam.

mod adam;
mod matrix;
mod tape;

pub use adam::{adam_step, AdamState};
pub use matrix::Matrix;
pub use tape::{
    finite_difference_grad, leaky_relu, sigmoid, softmax_rows, softplus, Gradients, NodeId, Op,
    Tape,
};

/// Global L2 norm over a set of gradient blocks.
pub fn global_norm<'a>(blocks: impl IntoIterator<Item = &'a Matrix>) -> f64 {
    blocks.into_iter().map(Matrix::norm_sq).sum::<f64>().sqrt()
}

/// Scales all blocks in place so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(blocks: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = global_norm(blocks.iter());
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for b in blocks.iter_mut() {
            for x in b.data_mut() {
                *x *= s;
            }
        }
    }
    norm
}
