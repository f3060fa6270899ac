//! Wide-and-deep sensor forecaster.

mod config;
mod cost;
mod model;
mod train;

pub use config::{Dl2Base, SectionLayout, WdnnConfig};
pub use cost::{section_cost, total_cost};
pub use model::{Wdnn, WdnnTape};
pub use train::{evaluate_cost, section_targets, train_wdnn, TrainOptions, TrainReport};
