use crate::error::{Error, Result};

/// `(1/n) Σ (pred_i - target_i)^2`.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::dim(format!(
            "mse over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::dim("mse of empty vectors"));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Gradient of [`mse`] with respect to `pred`, multiplied by `scale`.
pub fn mse_grad(pred: &[f64], target: &[f64], scale: f64) -> Vec<f64> {
    let k = 2.0 * scale / pred.len() as f64;
    pred.iter().zip(target).map(|(p, t)| k * (p - t)).collect()
}
