use crate::error::{Error, Result};

/// Batch cost of one output section:
/// `c_g = (1/s) Σ_t (1/n) Σ_i (Y_t[i] - Ỹ_t[i])^2`, where `n` is the length
/// of each prediction (`m_se^g · predict_steps`).
pub fn section_cost(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::dim("section cost of an empty batch"));
    }
    if preds.len() != targets.len() {
        return Err(Error::dim(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mut sum = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        sum += crate::nn::mse(p, t)?;
    }
    Ok(sum / preds.len() as f64)
}

/// `c = Σ_g c_g`.
pub fn total_cost(section_costs: &[f64]) -> f64 {
    section_costs.iter().sum()
}
