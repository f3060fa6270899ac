use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::Wdnn;
use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::nn::{Parameterized, Sgd, SgdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub sgd: SgdConfig,
    pub epochs: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

/// Cost traces. `validation_cost[0]` is measured before the first update,
/// `validation_cost[k]` after epoch `k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_cost: Vec<f64>,
    pub validation_cost: Vec<f64>,
}

/// Splits a full sensor target into one target per section.
pub fn section_targets(model: &Wdnn, full: &[f64]) -> Vec<Vec<f64>> {
    let cfg = model.config();
    (0..cfg.sections())
        .map(|g| cfg.layout.gather(g, full, cfg.m_se))
        .collect()
}

/// Total cost `c` of `model` over every instance of `set` taken as one batch.
pub fn evaluate_cost(model: &Wdnn, set: &WindowSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::dim("cannot evaluate on an empty window set"));
    }
    let mut sum = 0.0;
    for i in 0..set.len() {
        let preds = model.forward(&set.input(i))?;
        for (p, t) in preds.iter().zip(section_targets(model, &set.target(i))) {
            sum += crate::nn::mse(p, &t)?;
        }
    }
    Ok(sum / set.len() as f64)
}

/// Minibatch SGD on the summed section cost.
pub fn train_wdnn(
    model: &mut Wdnn,
    train: &WindowSet,
    validation: Option<&WindowSet>,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    if train.geometry() != model.config().geometry() {
        return Err(Error::Config(
            "training windows do not match the model's W_in/H/predict_steps".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::dim("no training instances"));
    }
    let mut sgd = Sgd::new(opts.sgd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport::default();
    if let Some(v) = validation {
        report.validation_cost.push(evaluate_cost(model, v)?);
    }
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        for batch in order.chunks(opts.sgd.batch_size) {
            let mut grads = model.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_cost = 0.0;
            for &i in batch {
                let targets = section_targets(model, &train.target(i));
                batch_cost += model.accumulate(&train.input(i), &targets, scale, &mut grads)?;
            }
            if !batch_cost.is_finite() {
                return Err(Error::TrainingDivergence {
                    epoch,
                    reason: "non-finite cost".into(),
                });
            }
            epoch_sum += batch_cost;
            sgd.step(model.params_mut(), &grads, epoch)?;
        }
        report.train_cost.push(epoch_sum / train.len() as f64);
        if let Some(v) = validation {
            let c = evaluate_cost(model, v)?;
            if !c.is_finite() {
                return Err(Error::TrainingDivergence {
                    epoch,
                    reason: "non-finite validation cost".into(),
                });
            }
            report.validation_cost.push(c);
        }
    }
    Ok(report)
}
