use serde::{Deserialize, Serialize};

use super::normalize::FeatureMatrix;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Placement of an input window relative to its prediction target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGeometry {
    pub w_in: usize,
    pub horizon: usize,
    pub predict_steps: usize,
}

impl WindowGeometry {
    /// Samples consumed by one instance.
    pub fn span(&self) -> usize {
        self.w_in + self.horizon + self.predict_steps
    }

    /// Time of the first predicted step for an input window starting at `start`.
    pub fn target_time(&self, start: usize) -> usize {
        start + self.w_in + self.horizon
    }
}

/// Supervised instances cut from a feature matrix: the input is every feature
/// over `[t', t'+W_in)`, the target is the sensors over the first
/// `predict_steps` seconds from `t'+W_in+H`.
#[derive(Debug, Clone)]
pub struct WindowSet {
    geometry: WindowGeometry,
    features: FeatureMatrix,
    starts: Vec<usize>,
}

pub fn make_windows(features: FeatureMatrix, geometry: WindowGeometry) -> Result<WindowSet> {
    if geometry.w_in == 0 || geometry.predict_steps == 0 {
        return Err(Error::Config("W_in and predict_steps must be >= 1".into()));
    }
    let n = features.len();
    if n < geometry.span() {
        return Err(Error::dim(format!(
            "{n} records cannot hold one window of span {}",
            geometry.span()
        )));
    }
    let count = n - geometry.span() + 1;
    Ok(WindowSet {
        geometry,
        features,
        starts: (0..count).collect(),
    })
}

impl WindowSet {
    pub fn geometry(&self) -> WindowGeometry {
        self.geometry
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn start(&self, i: usize) -> usize {
        self.starts[i]
    }

    pub fn target_time(&self, i: usize) -> usize {
        self.geometry.target_time(self.starts[i])
    }

    /// Keeps every `stride`-th instance.
    pub fn strided(mut self, stride: usize) -> Self {
        let stride = stride.max(1);
        self.starts = self.starts.into_iter().step_by(stride).collect();
        self
    }

    /// Keeps the instances whose index satisfies `keep`.
    pub fn filter(mut self, keep: impl Fn(usize) -> bool) -> Self {
        self.starts.retain(|&s| keep(s));
        self
    }

    /// `m × W_in` input, one channel per feature.
    pub fn input(&self, i: usize) -> Tensor {
        input_window(&self.features, self.starts[i], self.geometry.w_in)
    }

    /// Sensor values over the predicted steps, step-major.
    pub fn target(&self, i: usize) -> Vec<f64> {
        let t = self.target_time(i);
        let m_se = self.features.m_se;
        (0..self.geometry.predict_steps)
            .flat_map(|k| self.features.row(t + k)[..m_se].iter().copied())
            .collect()
    }
}

/// Transposes the rows `[start, start+w_in)` into a channel-major tensor.
pub fn input_window(features: &FeatureMatrix, start: usize, w_in: usize) -> Tensor {
    let m = features.width();
    let mut data = vec![0.0; m * w_in];
    for tau in 0..w_in {
        for (f, &v) in features.row(start + tau).iter().enumerate() {
            data[f * w_in + tau] = v;
        }
    }
    Tensor::new(m, data).expect("m channels")
}
