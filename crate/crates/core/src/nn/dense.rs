use rand::Rng;

use super::activation::leaky_relu_scalar;
use super::ensure_finite;
use super::init::{uniform_fill, uniform_limit};
use crate::error::{Error, Result};

/// Fully connected layer `y = W x + b`, `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayerParams {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayerParams {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config("dense layer widths must be positive".into()));
        }
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::dim(format!(
                "dense {in_dim}->{out_dim} given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        ensure_finite(&weights, "dense weights")?;
        ensure_finite(&bias, "dense bias")?;
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    /// Uniform weights in `±sqrt(6/(in+out))`, zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        let limit = uniform_limit(in_dim, out_dim);
        let weights = uniform_fill(in_dim * out_dim, limit, rng);
        Self::new(in_dim, out_dim, weights, vec![0.0; out_dim])
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
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

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::dim(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        Ok(self
            .weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect())
    }

    /// Accumulates parameter gradients and returns `dL/dx` when requested.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        grad_out: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        debug_assert_eq!(grad_out.len(), self.out_dim);
        for (o, &g) in grad_out.iter().enumerate() {
            grad_b[o] += g;
            if g != 0.0 {
                let row = &mut grad_w[o * self.in_dim..(o + 1) * self.in_dim];
                row.iter_mut().zip(x).for_each(|(gw, v)| *gw += g * v);
            }
        }
        want_input_grad.then(|| {
            let mut dx = vec![0.0; self.in_dim];
            for (row, &g) in self.weights.chunks_exact(self.in_dim).zip(grad_out) {
                if g != 0.0 {
                    dx.iter_mut().zip(row).for_each(|(d, w)| *d += g * w);
                }
            }
            dx
        })
    }
}

/// `W x + b`, optionally passed through LeakyReLU.
pub fn dense_forward(x: &[f64], p: &DenseLayerParams, activate: bool) -> Result<Vec<f64>> {
    ensure_finite(x, "dense input")?;
    let mut y = p.forward(x)?;
    if activate {
        y.iter_mut().for_each(|v| *v = leaky_relu_scalar(*v));
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(in_dim: usize, out_dim: usize, w: &[f64], b: &[f64]) -> DenseLayerParams {
        DenseLayerParams::new(in_dim, out_dim, w.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn identity_map() {
        let p = layer(2, 2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        assert_eq!(dense_forward(&[1.0, 2.0], &p, false).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn identity_with_activation() {
        let p = layer(2, 2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        assert_eq!(dense_forward(&[1.0, -1.0], &p, true).unwrap(), vec![1.0, -0.01]);
    }

    #[test]
    fn single_output() {
        let p = layer(2, 1, &[2.0, 2.0], &[1.0]);
        assert_eq!(dense_forward(&[0.5, 0.5], &p, false).unwrap(), vec![3.0]);
    }

    #[test]
    fn shape_errors() {
        let p = layer(2, 1, &[2.0, 2.0], &[1.0]);
        assert!(matches!(dense_forward(&[1.0], &p, false), Err(Error::Dimension(_))));
        assert!(DenseLayerParams::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(DenseLayerParams::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
    }
}
