//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};

/// Compares an analytic gradient against central differences of `loss`.
///
/// Returns the maximum over coordinates of
/// `|g_analytic - g_numeric| / max(1e-8, |g_analytic| + |g_numeric|)`.
pub fn finite_diff_check<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    epsilon: f64,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon}")));
    }
    if analytic.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "analytic gradient len {} vs params len {}",
            analytic.len(),
            params.len()
        )));
    }
    let mut scratch = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        scratch[i] = params[i] + epsilon;
        let plus = loss(&scratch)?;
        scratch[i] = params[i] - epsilon;
        let minus = loss(&scratch)?;
        scratch[i] = params[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss at perturbed coordinate {i}: {plus}, {minus}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
