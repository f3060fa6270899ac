//! Scoring, replays, sweeps and experiment orchestration.

mod attacks;
mod experiment;
mod interventions;
mod metrics;
mod replay;
mod sweep;

pub use attacks::{attack_outcomes, intervals_from_labels, AttackInterval, AttackOutcome};
pub use experiment::{
    run_experiment, write_attacks_csv, write_threshold_trace, DatasetSource, ExperimentReport, Manifest, ProfileRef,
    Splits, SweepAxes, SweepResults, Timing,
};
pub use interventions::{false_alarm_episodes, interventions_rate};
pub use metrics::{point_metrics, PointMetrics};
pub use replay::{redetect, replay, summarize, summarize_trace, FeedbackPolicy, RunSummary, RunTrace, Technician};
pub use sweep::{sweep_noise, sweep_w_anom, sweep_w_grace, write_sweep_csv, SweepPoint};
