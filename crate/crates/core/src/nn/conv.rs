use rand::Rng;

use super::activation::leaky_relu_scalar;
use super::init::{uniform_fill, uniform_limit};
use super::{ensure_finite, Tensor};
use crate::error::{Error, Result};

/// Bank of 1-D kernels applied as valid (unpadded) cross-correlation.
///
/// Weights are laid out `kernels × in_channels × kernel_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayerParams {
    in_channels: usize,
    kernels: usize,
    kernel_size: usize,
    stride: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Conv1dLayerParams {
    pub fn new(
        in_channels: usize,
        kernel_size: usize,
        stride: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if kernel_size == 0 || stride == 0 || in_channels == 0 {
            return Err(Error::Config(
                "conv kernel size, stride and channel count must be >= 1".into(),
            ));
        }
        let kernels = bias.len();
        if kernels == 0 || weights.len() != kernels * in_channels * kernel_size {
            return Err(Error::dim(format!(
                "{} conv weights do not match {kernels} kernels of {in_channels}x{kernel_size}",
                weights.len()
            )));
        }
        ensure_finite(&weights, "conv weights")?;
        ensure_finite(&bias, "conv bias")?;
        Ok(Self {
            in_channels,
            kernels,
            kernel_size,
            stride,
            weights,
            bias,
        })
    }

    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        kernels: usize,
        kernel_size: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = uniform_limit(in_channels * kernel_size, kernels * kernel_size);
        let weights = uniform_fill(kernels * in_channels * kernel_size, limit, rng);
        Self::new(in_channels, kernel_size, stride, weights, vec![0.0; kernels])
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernels(&self) -> usize {
        self.kernels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.bias)
    }

    pub fn output_len(&self, len: usize) -> Result<usize> {
        if len < self.kernel_size {
            return Err(Error::WindowTooShort {
                len,
                kernel: self.kernel_size,
            });
        }
        Ok((len - self.kernel_size) / self.stride + 1)
    }

    fn kernel(&self, o: usize) -> &[f64] {
        let n = self.in_channels * self.kernel_size;
        &self.weights[o * n..(o + 1) * n]
    }

    /// Pre-activation cross-correlation.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.channels() != self.in_channels {
            return Err(Error::dim(format!(
                "conv expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        let len = x.len();
        let out_len = self.output_len(len)?;
        let k = self.kernel_size;
        let mut out = vec![0.0; self.kernels * out_len];
        for o in 0..self.kernels {
            let w = self.kernel(o);
            let dst = &mut out[o * out_len..(o + 1) * out_len];
            dst.iter_mut().for_each(|v| *v = self.bias[o]);
            for c in 0..self.in_channels {
                let src = x.row(c);
                let wc = &w[c * k..(c + 1) * k];
                for (t, v) in dst.iter_mut().enumerate() {
                    let start = t * self.stride;
                    *v += wc
                        .iter()
                        .zip(&src[start..start + k])
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                }
            }
        }
        Tensor::new(self.kernels, out)
    }

    pub(crate) fn backward(
        &self,
        x: &Tensor,
        grad_out: &Tensor,
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        want_input_grad: bool,
    ) -> Option<Tensor> {
        let k = self.kernel_size;
        let out_len = grad_out.len();
        let mut dx = want_input_grad.then(|| Tensor::zeros(self.in_channels, x.len()));
        let n = self.in_channels * k;
        for o in 0..self.kernels {
            let g = grad_out.row(o);
            grad_b[o] += g.iter().sum::<f64>();
            let w = self.kernel(o);
            let gw = &mut grad_w[o * n..(o + 1) * n];
            for c in 0..self.in_channels {
                let src = x.row(c);
                for j in 0..k {
                    let mut acc = 0.0;
                    for (t, &gt) in g.iter().enumerate().take(out_len) {
                        acc += gt * src[t * self.stride + j];
                    }
                    gw[c * k + j] += acc;
                }
                if let Some(dx) = dx.as_mut() {
                    let len = dx.len();
                    let row = &mut dx.data_mut()[c * len..(c + 1) * len];
                    let wc = &w[c * k..(c + 1) * k];
                    for (t, &gt) in g.iter().enumerate() {
                        let start = t * self.stride;
                        row[start..start + k]
                            .iter_mut()
                            .zip(wc)
                            .for_each(|(d, w)| *d += gt * w);
                    }
                }
            }
        }
        dx
    }
}

/// Cross-correlation of every kernel with `x` followed by LeakyReLU.
pub fn conv1d_forward(x: &Tensor, p: &Conv1dLayerParams) -> Result<Tensor> {
    ensure_finite(x.data(), "conv input")?;
    let mut y = p.forward(x)?;
    y.data_mut()
        .iter_mut()
        .for_each(|v| *v = leaky_relu_scalar(*v));
    Ok(y)
}
