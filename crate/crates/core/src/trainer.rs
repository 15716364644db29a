//! Denoising-autoencoder training loop: seeded per-epoch shuffling, batched
//! forward/backward over noisy→clean pairs, Adam updates, and post-epoch loss
//! tracking on the full train and test sets.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::autoencoder::{
    backward, forward, init_weights, AutoencoderSpec, AutoencoderWeights, WeightGradients,
};
use crate::dataset::{ParamDataset, SHAPE_NORMALIZATION};
use crate::error::{Error, Result};
use crate::morphable::ParamGroup;
use crate::nn::{adam_step, mse_loss, AdamState};
use crate::rng::stream;

/// Training hyperparameters. Defaults: 10 epochs, learning rate 0.001,
/// batch size 128, per-epoch reshuffling on.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 10, learning_rate: 0.001, batch_size: 128, seed: 0, shuffle: true }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Invalid(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-epoch losses (mean MSE over the full sets) and wall-clock seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

fn check_dataset(spec: &AutoencoderSpec, dataset: &ParamDataset, name: &str) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Invalid(format!("{name} set must be nonempty")));
    }
    if dataset.param_count != spec.input_length {
        return Err(Error::Mismatch {
            what: "dataset parameter count",
            expected: spec.input_length,
            actual: dataset.param_count,
        });
    }
    let expected = match dataset.group {
        ParamGroup::Identity => SHAPE_NORMALIZATION,
        ParamGroup::Expression => 1.0,
    };
    if dataset.normalization != expected {
        return Err(Error::Invalid(format!(
            "{name} set ({} group) carries normalization {}, expected {expected}; \
             normalize shape datasets before training",
            dataset.group.name(),
            dataset.normalization
        )));
    }
    Ok(())
}

/// Mean per-sample gradients and mean loss over one batch of pair indices.
/// Per-sample work may run in parallel; the results are summed in index
/// order so the outcome is bitwise deterministic for any thread count.
fn batch_gradients(
    weights: &AutoencoderWeights,
    dataset: &ParamDataset,
    batch: &[usize],
) -> Result<(WeightGradients, f64)> {
    let per_sample: Vec<(WeightGradients, f64)> = batch
        .par_iter()
        .map(|&ix| {
            let pair = &dataset.pairs[ix];
            let (output, trace) = forward(weights, &pair.noisy)?;
            let (loss, grad_out) = mse_loss(&output, &pair.clean)?;
            let grads = backward(weights, &trace, &grad_out)?;
            Ok((grads, loss))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = WeightGradients::zeros_like(weights);
    let mut loss_sum = 0.0;
    for (grads, loss) in &per_sample {
        total.add_assign(grads);
        loss_sum += loss;
    }
    total.scale(1.0 / batch.len() as f64);
    Ok((total, loss_sum / batch.len() as f64))
}

/// Train a freshly initialized network on the given pair datasets.
pub fn train(
    spec: &AutoencoderSpec,
    train_set: &ParamDataset,
    test_set: &ParamDataset,
    config: &TrainConfig,
) -> Result<(AutoencoderWeights, TrainHistory)> {
    config.validate()?;
    check_dataset(spec, train_set, "train")?;
    check_dataset(spec, test_set, "test")?;
    if train_set.group != test_set.group {
        return Err(Error::Invalid(format!(
            "train set is {} but test set is {}",
            train_set.group.name(),
            test_set.group.name()
        )));
    }

    let mut weights = init_weights(spec, config.seed);
    let mut states: Vec<[AdamState; 2]> = weights
        .encoder
        .iter()
        .chain(&weights.decoder)
        .map(|k| {
            [
                AdamState::new(k.weights.len(), config.learning_rate),
                AdamState::new(k.bias.len(), config.learning_rate),
            ]
        })
        .collect();

    let mut history = TrainHistory {
        train_loss: Vec::with_capacity(config.epochs),
        test_loss: Vec::with_capacity(config.epochs),
        epoch_seconds: Vec::with_capacity(config.epochs),
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.epochs {
        let started = Instant::now();
        if config.shuffle {
            order.sort_unstable();
            order.shuffle(&mut stream(config.seed, "shuffle", &[epoch as u64]));
        }

        let mut batch_count = 0usize;
        for batch in order.chunks(config.batch_size) {
            batch_count += 1;
            let (grads, batch_loss) = batch_gradients(&weights, train_set, batch)?;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, batch: batch_count });
            }
            let kernels = weights.encoder.iter_mut().chain(weights.decoder.iter_mut());
            let kernel_grads = grads.encoder.iter().chain(&grads.decoder);
            for ((kernel, kg), state) in kernels.zip(kernel_grads).zip(states.iter_mut()) {
                adam_step(&mut kernel.weights, &kg.weights, &mut state[0])?;
                adam_step(&mut kernel.bias, &kg.bias, &mut state[1])?;
            }
        }

        let (train_loss, _) = evaluate_mse(&weights, train_set)?;
        let (test_loss, _) = evaluate_mse(&weights, test_set)?;
        if !train_loss.is_finite() || !test_loss.is_finite() {
            return Err(Error::Diverged { epoch: epoch + 1, batch: batch_count });
        }
        history.train_loss.push(train_loss);
        history.test_loss.push(test_loss);
        history.epoch_seconds.push(started.elapsed().as_secs_f64());
    }

    Ok((weights, history))
}

/// `(output_mse, input_mse)` over a dataset: mean MSE of the denoised output
/// against clean, and of the raw noisy input against clean, in the dataset's
/// normalized units.
pub fn evaluate_mse(weights: &AutoencoderWeights, dataset: &ParamDataset) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(Error::Invalid("cannot evaluate an empty dataset".into()));
    }
    if dataset.param_count != weights.spec.input_length {
        return Err(Error::Mismatch {
            what: "dataset parameter count",
            expected: weights.spec.input_length,
            actual: dataset.param_count,
        });
    }
    let per_pair: Vec<(f64, f64)> = dataset
        .pairs
        .par_iter()
        .map(|pair| {
            let (output, _) = forward(weights, &pair.noisy)?;
            let (output_mse, _) = mse_loss(&output, &pair.clean)?;
            let (input_mse, _) = mse_loss(&pair.noisy, &pair.clean)?;
            Ok((output_mse, input_mse))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_pair.len() as f64;
    let (mut out_sum, mut in_sum) = (0.0, 0.0);
    for (o, i) in per_pair {
        out_sum += o;
        in_sum += i;
    }
    Ok((out_sum / n, in_sum / n))
}
