//! Dense and sparse matrix kernels, gradient checking and the Adam optimizer.
//!
//! Everything here works in `f64`. Matrices are plain value types; the
//! model code composes them into its hand-derived forward and backward passes.

mod adam;
mod gradcheck;
mod matrix;
mod sparse;

pub use adam::{clip_global_norm, AdamConfig, AdamState, Parameters};
pub use gradcheck::{grad_check, GradCheck};
pub use matrix::Matrix;
pub use sparse::{spmm, CsrMatrix};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
