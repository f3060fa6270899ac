use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::record::SampleRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default)]
    pub mean: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self {
            mean: 0.0,
            sigma,
            seed,
        }
    }
}

/// Adds seeded Gaussian noise to every sensor reading. Actuators and labels
/// are left untouched.
pub fn add_gaussian_noise(records: &[SampleRecord], cfg: &NoiseConfig) -> Result<Vec<SampleRecord>> {
    if !(cfg.sigma >= 0.0 && cfg.sigma.is_finite() && cfg.mean.is_finite()) {
        return Err(Error::Config(format!(
            "noise needs finite mean and sigma >= 0, got mean={} sigma={}",
            cfg.mean, cfg.sigma
        )));
    }
    if cfg.sigma == 0.0 && cfg.mean == 0.0 {
        return Ok(records.to_vec());
    }
    let normal = Normal::new(cfg.mean, cfg.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.sensors.iter_mut().for_each(|x| *x += normal.sample(&mut rng));
            r
        })
        .collect())
}
