use rand::Rng;

/// Bound of the uniform initialization range, `sqrt(6 / (fan_in + fan_out))`.
pub fn uniform_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out).max(1) as f64).sqrt()
}

pub(crate) fn uniform_fill<R: Rng + ?Sized>(n: usize, limit: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}
