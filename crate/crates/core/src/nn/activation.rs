use super::ensure_finite;
use crate::error::Result;

/// Slope of the negative branch.
pub const LEAKY_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu_scalar(x: f64) -> f64 {
    x.max(0.0) + LEAKY_SLOPE * x.min(0.0)
}

/// `max(0, x) + 0.01 * min(0, x)` elementwise.
pub fn leaky_relu(x: &[f64]) -> Result<Vec<f64>> {
    ensure_finite(x, "leaky_relu input")?;
    Ok(x.iter().map(|&v| leaky_relu_scalar(v)).collect())
}

/// Gradient through the activation given its input. The derivative at 0 is
/// taken from the positive branch.
pub fn leaky_relu_backward(input: &[f64], grad_out: &[f64]) -> Vec<f64> {
    input
        .iter()
        .zip(grad_out)
        .map(|(&x, &g)| if x >= 0.0 { g } else { LEAKY_SLOPE * g })
        .collect()
}
