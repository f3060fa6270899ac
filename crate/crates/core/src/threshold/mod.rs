//! Adaptive anomaly thresholds.

mod median;
mod ttnn;
mod tune;

pub use median::{compute_t_base, median_filter};
pub use ttnn::{train_ttnn, training_pairs, Ttnn, TtnnConfig, TtnnTrainOptions};
pub use tune::{online_update, tune_threshold, ErrorForecaster, TuneOutcome};
