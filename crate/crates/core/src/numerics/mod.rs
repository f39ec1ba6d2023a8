//! Deterministic dense linear algebra, seeded randomness, and gradient
//! verification underpinning all training code.
//!
//! Everything here runs in double precision. Summations over vectors and
//! point sets use a fixed left-to-right order over storage index, so repeated
//! invocation with identical inputs is bit-identical.

mod gradcheck;
mod mat;
mod mlp;
mod rng;

pub use gradcheck::finite_diff_check;
pub use mat::Mat;
pub use mlp::{
    backward_from_trace, mlp_backward, mlp_forward, Activation, DropoutMask, MlpGrad, MlpLayout,
    MlpTrace,
};
pub use rng::{derive_seed, Rng};

use crate::error::{Error, Result};

/// Numerically stable softmax: `exp(v_i - max v) / sum_j exp(v_j - max v)`.
///
/// Output entries are positive and sum to 1 within 1e-9; the per-row argmax
/// (lowest index on ties) is preserved because the map is strictly monotone.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("softmax of empty vector".into()));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("softmax input {x}")));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for x in &mut out {
        *x /= sum;
    }
    Ok(out)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
