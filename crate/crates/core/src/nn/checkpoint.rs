//! Parameter checkpoint container.
//!
//! A checkpoint is a JSON document:
//!
//! ```json
//! {
//!   "format": "plantwatch-params",
//!   "version": 1,
//!   "seed": 42,
//!   "tensors": [
//!     { "name": "dl1.weight", "shape": [4, 192], "values": [0.01, ...] },
//!     ...
//!   ]
//! }
//! ```
//!
//! Tensors appear in the model's registry order and are matched back by name
//! and shape. Values round-trip bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Parameterized;
use crate::error::{Error, Result};

pub const FORMAT: &str = "plantwatch-params";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn capture<M: Parameterized + ?Sized>(model: &M, seed: u64) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            seed,
            tensors: model
                .param_views()
                .into_iter()
                .map(|v| TensorRecord {
                    name: v.name,
                    shape: v.shape,
                    values: v.values.to_vec(),
                })
                .collect(),
        }
    }

    /// Copies the stored values into `model`, which must have the same
    /// registry (names and shapes).
    pub fn restore<M: Parameterized + ?Sized>(&self, model: &mut M) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let views: Vec<(String, Vec<usize>)> = model
            .param_views()
            .into_iter()
            .map(|v| (v.name, v.shape))
            .collect();
        if views.len() != self.tensors.len() {
            return Err(Error::Schema(format!(
                "checkpoint has {} tensors, model has {}",
                self.tensors.len(),
                views.len()
            )));
        }
        for ((name, shape), rec) in views.iter().zip(&self.tensors) {
            if *name != rec.name || *shape != rec.shape {
                return Err(Error::Schema(format!(
                    "checkpoint tensor {} {:?} does not match model tensor {name} {shape:?}",
                    rec.name, rec.shape
                )));
            }
            if rec.values.len() != shape.iter().product::<usize>() {
                return Err(Error::Schema(format!("tensor {} has wrong length", rec.name)));
            }
            super::ensure_finite(&rec.values, &rec.name)?;
        }
        for (dst, rec) in model.params_mut().into_iter().zip(&self.tensors) {
            dst.copy_from_slice(&rec.values);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
