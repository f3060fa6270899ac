pub mod actuator_db;
pub mod adapt;
pub mod data;
pub mod detector;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod threshold;
pub mod wdnn;

pub use error::{Error, Result};

/// Book chapters, compiled as doc-tests so the listings stay in step with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/forecaster.md")]
    mod forecaster {}
    #[doc = include_str!("../../../book/src/actuators.md")]
    mod actuators {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/adaptation.md")]
    mod adaptation {}
    #[doc = include_str!("../../../book/src/synthetic-plant.md")]
    mod synthetic_plant {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
