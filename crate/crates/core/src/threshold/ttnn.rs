use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::median::median_filter;
use crate::error::{Error, Result};
use crate::nn::{
    mse_grad, Conv1dLayerParams, DenseLayerParams, Gradients, Op, ParamView, Parameterized,
    Sequential, Sgd, SgdConfig, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtnnConfig {
    pub w_in: usize,
    pub horizon: usize,
    /// CL2 kernel count.
    pub w_out: usize,
    #[serde(default = "two")]
    pub cl1_kernels: usize,
    #[serde(default = "two")]
    pub kernel_size: usize,
    #[serde(default = "two")]
    pub pool_factor: usize,
    #[serde(default = "yes")]
    pub output_activation: bool,
}

fn two() -> usize {
    2
}
fn yes() -> bool {
    true
}

impl TtnnConfig {
    pub fn new(w_in: usize, horizon: usize, w_out: usize) -> Self {
        Self {
            w_in,
            horizon,
            w_out,
            cl1_kernels: 2,
            kernel_size: 2,
            pool_factor: 2,
            output_activation: true,
        }
    }

    /// Time-axis lengths after CL1, MP1, CL2, MP2.
    pub fn lengths(&self) -> Result<[usize; 4]> {
        let k = self.kernel_size;
        let conv = |len: usize| {
            if len < k {
                Err(Error::WindowTooShort { len, kernel: k })
            } else {
                Ok(len - k + 1)
            }
        };
        let c1 = conv(self.w_in)?;
        let p1 = c1.div_ceil(self.pool_factor);
        let c2 = conv(p1)?;
        Ok([c1, p1, c2, c2.div_ceil(self.pool_factor)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_out == 0 || self.cl1_kernels == 0 || self.kernel_size == 0 || self.pool_factor == 0 {
            return Err(Error::Config("TTNN layer sizes must be positive".into()));
        }
        self.lengths().map(|_| ())
    }
}

/// Forecaster of one section's prediction-error series.
///
/// Inputs and outputs are divided by `scale` inside the network so that
/// training is insensitive to the absolute magnitude of the errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Ttnn {
    config: TtnnConfig,
    net: Sequential,
    scale: f64,
}

impl Ttnn {
    pub fn build(config: TtnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [_, _, _, p2] = config.lengths()?;
        let k = config.kernel_size;
        let mut net = Sequential::new();
        net.conv("cl1", Conv1dLayerParams::init(1, config.cl1_kernels, k, 1, &mut rng)?)
            .push("mp1", Op::MaxPool1d { factor: config.pool_factor })
            .conv("cl2", Conv1dLayerParams::init(config.cl1_kernels, config.w_out, k, 1, &mut rng)?)
            .push("mp2", Op::MaxPool1d { factor: config.pool_factor })
            .push("flatten", Op::Reshape { channels: 1 })
            .dense("dl", DenseLayerParams::init(config.w_out * p2, 1, &mut rng)?, config.output_activation);
        Ok(Self {
            config,
            net,
            scale: 1.0,
        })
    }

    pub fn config(&self) -> &TtnnConfig {
        &self.config
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn set_scale(&mut self, scale: f64) -> Result<()> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!("TTNN scale must be positive, got {scale}")));
        }
        self.scale = scale;
        Ok(())
    }

    fn input(&self, window: &[f64]) -> Result<Tensor> {
        if window.len() != self.config.w_in {
            return Err(Error::dim(format!(
                "TTNN expects windows of length {}, got {}",
                self.config.w_in,
                window.len()
            )));
        }
        Tensor::new(1, window.iter().map(|v| v / self.scale).collect())
    }

    /// Forecast in the units of the error series.
    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        Ok(self.net.forward(self.input(window)?)?.data()[0] * self.scale)
    }

    /// Squared error in scaled units, gradient accumulated with `weight`.
    fn accumulate(&self, window: &[f64], target: f64, weight: f64, grads: &mut Gradients) -> Result<f64> {
        let (y, tape) = self.net.forward_taped(self.input(window)?)?;
        let t = target / self.scale;
        let p = y.data()[0];
        let dy = mse_grad(&[p], &[t], weight);
        self.net
            .backward(&tape, Tensor::vector(dy), grads.tensors_mut(), false)?;
        Ok((p - t).powi(2))
    }

    /// Mean squared error in scaled units over `(window, target)` pairs.
    pub fn loss(&self, pairs: &[(&[f64], f64)]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::dim("loss of an empty batch"));
        }
        let mut sum = 0.0;
        for (w, t) in pairs {
            let p = self.forward(w)? / self.scale;
            sum += (p - t / self.scale).powi(2);
        }
        Ok(sum / pairs.len() as f64)
    }

    /// Epochs of minibatch SGD over `(window, target)` pairs.
    pub fn fit(&mut self, pairs: &[(&[f64], f64)], sgd: SgdConfig, epochs: usize, seed: u64) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Err(Error::dim("no TTNN training instances"));
        }
        let mut opt = Sgd::new(sgd)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut trace = Vec::with_capacity(epochs);
        for epoch in 1..=epochs {
            order.shuffle(&mut rng);
            let mut sum = 0.0;
            for batch in order.chunks(sgd.batch_size) {
                let mut grads = Gradients::zeros_like(&self.params());
                let w = 1.0 / batch.len() as f64;
                for &i in batch {
                    sum += self.accumulate(pairs[i].0, pairs[i].1, w, &mut grads)?;
                }
                opt.step(self.net.params_mut(), &grads, epoch)?;
            }
            let mean = sum / pairs.len() as f64;
            if !mean.is_finite() {
                return Err(Error::TrainingDivergence {
                    epoch,
                    reason: "non-finite TTNN loss".into(),
                });
            }
            trace.push(mean);
        }
        Ok(trace)
    }
}

impl Parameterized for Ttnn {
    fn param_views(&self) -> Vec<ParamView<'_>> {
        self.net.named_params("")
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.params_mut()
    }
}

/// Training pairs from a validation error series: the median-filtered window
/// `[t0, t0+W_in)` paired with the raw error at `t0 + W_in + H`.
pub fn training_pairs(filtered: &[f64], raw: &[f64], w_in: usize, horizon: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    if filtered.len() != raw.len() {
        return Err(Error::dim("filtered and raw series differ in length"));
    }
    if raw.len() <= w_in + horizon {
        return Err(Error::dim(format!(
            "error series of length {} too short for W_in={w_in}, H={horizon}",
            raw.len()
        )));
    }
    Ok((0..raw.len() - w_in - horizon)
        .map(|t0| (filtered[t0..t0 + w_in].to_vec(), raw[t0 + w_in + horizon]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtnnTrainOptions {
    pub sgd: SgdConfig,
    pub epochs: usize,
    pub median_kernel: usize,
    pub seed: u64,
}

/// Fits `ttnn` to forecast `series` at horizon `H`. Sets the scale to the
/// series mean (when positive) before training.
pub fn train_ttnn(ttnn: &mut Ttnn, series: &[f64], opts: &TtnnTrainOptions) -> Result<Vec<f64>> {
    let cfg = *ttnn.config();
    let filtered = median_filter(series, opts.median_kernel)?;
    let pairs = training_pairs(&filtered, series, cfg.w_in, cfg.horizon)?;
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    if mean.is_finite() && mean > 0.0 {
        ttnn.set_scale(mean)?;
    }
    let refs: Vec<(&[f64], f64)> = pairs.iter().map(|(w, t)| (w.as_slice(), *t)).collect();
    ttnn.fit(&refs, opts.sgd, opts.epochs, opts.seed)
}
