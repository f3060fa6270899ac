use serde::{Deserialize, Serialize};

use super::median::median_filter;
use super::ttnn::Ttnn;
use crate::error::{Error, Result};
use crate::nn::SgdConfig;

/// Anything that maps an error window to a forecast. Lets the tuning rule be
/// exercised with stubs.
pub trait ErrorForecaster {
    fn window_len(&self) -> usize;
    fn estimate(&self, window: &[f64]) -> Result<f64>;
}

impl ErrorForecaster for Ttnn {
    fn window_len(&self) -> usize {
        self.config().w_in
    }

    fn estimate(&self, window: &[f64]) -> Result<f64> {
        self.forward(window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub threshold: f64,
    pub max_estimate: f64,
    pub estimates: Vec<f64>,
}

/// New threshold from a batch of past errors.
///
/// `series` is the underlying error sequence the overlapping windows are cut
/// from; it is median-filtered once and every unit-shifted window of length
/// `W_in` is forecast. Estimates are floored at zero since they forecast a
/// squared error, so the result never drops below `t_base`.
pub fn tune_threshold<F: ErrorForecaster>(
    forecaster: &F,
    series: &[f64],
    median_kernel: usize,
    t_base: f64,
) -> Result<TuneOutcome> {
    let w = forecaster.window_len();
    if series.len() < w {
        return Err(Error::dim(format!(
            "error batch of length {} shorter than W_in={w}",
            series.len()
        )));
    }
    let filtered = median_filter(series, median_kernel)?;
    let estimates = filtered
        .windows(w)
        .map(|x| forecaster.estimate(x).map(|e| e.max(0.0)))
        .collect::<Result<Vec<f64>>>()?;
    let max_estimate = estimates.iter().copied().fold(0.0, f64::max);
    Ok(TuneOutcome {
        threshold: t_base + max_estimate,
        max_estimate,
        estimates,
    })
}

/// One SGD epoch on the windows of `series` against the errors observed
/// afterwards: window `i` is paired with `targets[i]`.
pub fn online_update(
    ttnn: &mut Ttnn,
    series: &[f64],
    targets: &[f64],
    median_kernel: usize,
    sgd: SgdConfig,
    seed: u64,
) -> Result<f64> {
    let w = ttnn.config().w_in;
    if targets.is_empty() || series.len() < w + targets.len() - 1 {
        return Err(Error::dim(format!(
            "{} targets need an error series of at least {} values, got {}",
            targets.len(),
            w + targets.len().saturating_sub(1),
            series.len()
        )));
    }
    let filtered = median_filter(series, median_kernel)?;
    let pairs: Vec<(&[f64], f64)> = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| (&filtered[i..i + w], t))
        .collect();
    let trace = ttnn.fit(&pairs, sgd, 1, seed)?;
    Ok(trace[0])
}
