use serde::{Deserialize, Serialize};

use super::Gradients;
use crate::error::{Error, Result};

/// Minibatch SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub batch_size: usize,
    /// Rescale the whole gradient to at most this L2 norm before stepping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_grad_norm: Option<f64>,
}

fn default_momentum() -> f64 {
    0.9
}

impl SgdConfig {
    pub fn new(learning_rate: f64, batch_size: usize) -> Self {
        Self {
            learning_rate,
            momentum: default_momentum(),
            batch_size,
            max_grad_norm: None,
        }
    }

    pub fn with_max_grad_norm(mut self, norm: f64) -> Self {
        self.max_grad_norm = Some(norm);
        self
    }

    pub fn with_momentum(mut self, momentum: f64) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.max_grad_norm.is_some_and(|n| !(n > 0.0)) {
            return Err(Error::Config("max_grad_norm must be positive".into()));
        }
        Ok(())
    }
}

/// SGD with classical momentum: `v <- mu v + g; p <- p - lr v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    cfg: SgdConfig,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(cfg: SgdConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            velocity: Vec::new(),
        })
    }

    pub fn config(&self) -> &SgdConfig {
        &self.cfg
    }

    /// `epoch` is only used to label a divergence error.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &Gradients, epoch: usize) -> Result<()> {
        if params.len() != grads.tensors().len() {
            return Err(Error::dim(format!(
                "{} parameter tensors but {} gradient tensors",
                params.len(),
                grads.tensors().len()
            )));
        }
        if !grads.is_finite() {
            return Err(Error::TrainingDivergence {
                epoch,
                reason: "non-finite gradient".into(),
            });
        }
        if self.velocity.is_empty() {
            self.velocity = grads.tensors().iter().map(|g| vec![0.0; g.len()]).collect();
        }
        let norm = grads
            .tensors()
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        let clip = match self.cfg.max_grad_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        let (lr, mu) = (self.cfg.learning_rate, self.cfg.momentum);
        for ((p, g), v) in params.into_iter().zip(grads.tensors()).zip(&mut self.velocity) {
            if p.len() != g.len() || v.len() != g.len() {
                return Err(Error::dim("gradient not aligned with parameters"));
            }
            for ((p, g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                *v = mu * *v + clip * g;
                *p -= lr * *v;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(p0: f64, gs: &[f64], lr: f64, mu: f64) -> Vec<f64> {
        let mut sgd = Sgd::new(SgdConfig::new(lr, 1).with_momentum(mu)).unwrap();
        let mut p = vec![p0];
        let mut trace = vec![p0];
        for &g in gs {
            sgd.step(vec![&mut p[..]], &Gradients::from_tensors(vec![vec![g]]), 0)
                .unwrap();
            trace.push(p[0]);
        }
        trace
    }

    #[test]
    fn vanilla_step() {
        assert_eq!(run(1.0, &[0.5], 0.01, 0.0)[1], 0.995);
    }

    #[test]
    fn clipped_step() {
        let cfg = SgdConfig::new(0.1, 1).with_momentum(0.0).with_max_grad_norm(1.0);
        let mut sgd = Sgd::new(cfg).unwrap();
        let mut p = vec![0.0, 0.0];
        sgd.step(vec![&mut p[..]], &Gradients::from_tensors(vec![vec![3.0, 4.0]]), 0)
            .unwrap();
        assert!((p[0] + 0.06).abs() < 1e-15 && (p[1] + 0.08).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_stationary() {
        assert_eq!(run(1.0, &[0.0, 0.0], 0.1, 0.9), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn momentum_recursion() {
        let t = run(1.0, &[1.0, 1.0], 0.1, 0.9);
        assert!((t[1] - 0.9).abs() < 1e-12);
        assert!((t[2] - 0.71).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_diverges() {
        let mut sgd = Sgd::new(SgdConfig::new(0.1, 1)).unwrap();
        let mut p = vec![1.0];
        let err = sgd
            .step(vec![&mut p[..]], &Gradients::from_tensors(vec![vec![f64::NAN]]), 7)
            .unwrap_err();
        assert!(matches!(err, Error::TrainingDivergence { epoch: 7, .. }));
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(SgdConfig::new(0.0, 1).validate().is_err());
        assert!(SgdConfig::new(0.1, 0).validate().is_err());
        assert!(SgdConfig::new(0.1, 1).with_momentum(1.0).validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn vanilla_changes_by_minus_lr_g(p in -10.0f64..10.0, g in -10.0f64..10.0, lr in 1e-4f64..1.0) {
            let after = run(p, &[g], lr, 0.0)[1];
            proptest::prop_assert_eq!(after, p - lr * g);
        }
    }
}
