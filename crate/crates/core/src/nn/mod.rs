//! Minimal network numerics: dense and 1-D convolutional layers, max pooling,
//! LeakyReLU, the mean-square-error loss, reverse-mode gradients and SGD.
//!
//! Everything is `f64`. Activations travel as [`Tensor`]s laid out
//! channel-major (`channels × len`); dense layers flatten whatever they
//! receive.

mod activation;
pub mod checkpoint;
mod conv;
mod dense;
mod graph;
mod init;
mod loss;
mod pool;
mod sgd;

pub use activation::{leaky_relu, leaky_relu_backward, leaky_relu_scalar, LEAKY_SLOPE};
pub use checkpoint::Checkpoint;
pub use conv::{conv1d_forward, Conv1dLayerParams};
pub use dense::{dense_forward, DenseLayerParams};
pub use graph::{Node, Op, Sequential, Tape};
pub use init::uniform_limit;
pub use loss::{mse, mse_grad};
pub use pool::{maxpool1d, maxpool1d_backward};
pub use sgd::{Sgd, SgdConfig};

use crate::error::{Error, Result};

/// A `channels × len` block of activations stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::dim("tensor needs at least one channel"));
        }
        if data.len() % channels != 0 {
            return Err(Error::dim(format!(
                "{} values cannot be split into {channels} channels",
                data.len()
            )));
        }
        Ok(Self { channels, data })
    }

    /// A single-channel tensor.
    pub fn vector(data: Vec<f64>) -> Self {
        Self { channels: 1, data }
    }

    pub fn zeros(channels: usize, len: usize) -> Self {
        Self {
            channels: channels.max(1),
            data: vec![0.0; channels.max(1) * len],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Length of the time axis.
    pub fn len(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, c: usize) -> &[f64] {
        let len = self.len();
        &self.data[c * len..(c + 1) * len]
    }

    /// Reinterprets the same values with a different channel count.
    pub fn reshape(self, channels: usize) -> Result<Self> {
        Tensor::new(channels, self.data)
    }
}

/// Sum of gradients aligned with a model's parameter registry.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &[&[f64]]) -> Self {
        Self {
            tensors: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn from_tensors(tensors: Vec<Vec<f64>>) -> Self {
        Self { tensors }
    }

    pub fn tensors(&self) -> &[Vec<f64>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.tensors
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|g| g.is_finite())
    }

    /// Flattened view in registry order.
    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flatten().copied().collect()
    }
}

/// Named view of one parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamView<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
}

/// Anything that owns trainable parameters in a fixed registry order.
pub trait Parameterized {
    fn param_views(&self) -> Vec<ParamView<'_>>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn params(&self) -> Vec<&[f64]> {
        self.param_views().into_iter().map(|v| v.values).collect()
    }

    fn param_count(&self) -> usize {
        self.param_views().iter().map(|v| v.values.len()).sum()
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NumericInput(format!(
            "{what}[{i}] = {}",
            values[i]
        ))),
        None => Ok(()),
    }
}
