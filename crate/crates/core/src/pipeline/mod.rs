//! Training-to-deployment glue: fitting a full system and streaming records
//! through it.

mod engine;
mod fit;

pub use engine::{Engine, EngineConfig, StepReport, ThresholdMode};
pub use fit::{fit_system, fit_thresholds, section_errors, FitConfig, FitReport, SectionThreshold, TrainedSystem};
