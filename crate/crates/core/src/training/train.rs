//! Mini-batch Adam training on `MAE(h, δ) + λ·CE(policy, a)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dataset::{Dataset, Sample};
use crate::adam::{adam_step, AdamState};
use crate::domains::encode_pair;
use crate::error::{CoatError, Result};
use crate::model::{HeadMode, Model};
use crate::ops::LossKind;
use crate::tape::Tape;
use crate::tensor::{Gradients, Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    /// Learning rate for curriculum fine-tuning.
    pub curriculum_lr: f64,
    pub epochs: usize,
    pub curriculum_epochs: usize,
    pub batch_size: usize,
    /// Weight of the policy cross-entropy term.
    pub lambda: f64,
    pub seed: u64,
    /// Fraction of instances held out for validation.
    pub validation_fraction: f64,
    /// Stop once this many optimizer steps have been taken.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            curriculum_lr: 1e-4,
            epochs: 30,
            curriculum_epochs: 10,
            batch_size: 32,
            lambda: 1.0,
            seed: 0,
            validation_fraction: 0.1,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.curriculum_lr > 0.0) {
            return Err(CoatError::Config("learning rates must be positive".into()));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(CoatError::Config("lambda must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(CoatError::Config("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(CoatError::Config("validation fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSummary {
    /// Mean combined loss.
    pub loss: f64,
    /// Mean `|h - δ|`.
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Running means over the epoch's batches, taken before each update.
    pub train: LossSummary,
    pub validation: Option<LossSummary>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Loss of the incoming model on the training split, before any update.
    pub initial_loss: f64,
    /// Loss on the first batch, computed from the incoming parameters.
    pub first_batch_loss: f64,
    pub history: Vec<EpochMetrics>,
    pub steps: usize,
    pub train_samples: usize,
    pub validation_samples: usize,
}

struct SampleGrad<T> {
    loss: f64,
    mae: f64,
    grads: Gradients<T>,
}

fn one_hot<T: Real>(len: usize, idx: usize) -> Tensor<T> {
    Tensor::from_fn(&[len], |i| if i == idx { T::one() } else { T::zero() })
}

/// Loss of one sample, recorded on a fresh tape.
fn sample_loss<'a, T: Real>(
    model: &'a Model<T>,
    dataset: &Dataset,
    sample: &Sample,
    lambda: f64,
    tape: &mut Tape<'a, T>,
) -> Result<(crate::tape::Var, f64)> {
    let state = dataset.state(sample);
    let enc = encode_pair::<T>(state, &state.goal())?;
    let agents = enc.agent_tuples();
    let x = tape.input(enc.tensor);
    let out = model.forward_tape(tape, x, &agents)?;
    let h = tape.value(out.h).data()[0].as_f64();
    let target = Tensor::vector(vec![T::lit(f64::from(sample.delta))]);
    let mut loss = tape.loss(LossKind::Mae, out.h, target)?;
    if let (Some(policy), Some(action), true) = (out.policy, sample.action, lambda > 0.0) {
        let onehot = one_hot(model.config.action_count, action.index());
        let ce = tape.loss(LossKind::CategoricalCrossEntropy, policy, onehot)?;
        let weighted = tape.scale(ce, T::lit(lambda));
        loss = tape.add(loss, weighted)?;
    }
    Ok((loss, (h - f64::from(sample.delta)).abs()))
}

fn sample_grad<T: Real>(model: &Model<T>, dataset: &Dataset, sample: &Sample, lambda: f64) -> Result<SampleGrad<T>> {
    let mut tape = Tape::new();
    let (loss, mae) = sample_loss(model, dataset, sample, lambda, &mut tape)?;
    let grads = tape.backward(loss, &model.params)?;
    Ok(SampleGrad {
        loss: tape.value(loss).item().as_f64(),
        mae,
        grads,
    })
}

fn lambda_for<T: Real>(model: &Model<T>, lambda: f64) -> f64 {
    match model.config.head_mode {
        HeadMode::Dual => lambda,
        HeadMode::Single => 0.0,
    }
}

/// Forward-only loss over `indices` (parallel, order-independent result).
pub fn evaluate_loss<T: Real>(model: &Model<T>, dataset: &Dataset, indices: &[usize], lambda: f64) -> Result<LossSummary> {
    if indices.is_empty() {
        return Err(CoatError::Usage("cannot evaluate loss on zero samples".into()));
    }
    let lambda = lambda_for(model, lambda);
    let parts: Vec<(f64, f64)> = indices
        .par_iter()
        .map(|&i| {
            let mut tape = Tape::new();
            let (loss, mae) = sample_loss(model, dataset, &dataset.samples()[i], lambda, &mut tape)?;
            Ok((tape.value(loss).item().as_f64(), mae))
        })
        .collect::<Result<_>>()?;
    let n = parts.len() as f64;
    Ok(LossSummary {
        loss: parts.iter().map(|p| p.0).sum::<f64>() / n,
        mae: parts.iter().map(|p| p.1).sum::<f64>() / n,
    })
}

/// Optimizer state carried across epochs (and across calls).
pub struct Trainer<T: Real> {
    pub adam: AdamState<T>,
    rng: ChaCha8Rng,
    pub steps: usize,
    lr: f64,
    lambda: f64,
    batch_size: usize,
}

impl<T: Real> Trainer<T> {
    pub fn new(config: &TrainConfig, lr: f64) -> Result<Self> {
        config.validate()?;
        if lr.is_nan() || lr <= 0.0 {
            return Err(CoatError::Config("learning rate must be positive".into()));
        }
        Ok(Self {
            adam: AdamState::default(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            steps: 0,
            lr,
            lambda: config.lambda,
            batch_size: config.batch_size,
        })
    }

    /// One optimizer step on the given samples; returns the pre-update loss
    /// summary of the batch.
    pub fn step(&mut self, model: &mut Model<T>, dataset: &Dataset, batch: &[usize]) -> Result<LossSummary> {
        if batch.is_empty() {
            return Err(CoatError::Usage("empty batch".into()));
        }
        let lambda = lambda_for(model, self.lambda);
        let shared: &Model<T> = model;
        let parts: Vec<SampleGrad<T>> = batch
            .par_iter()
            .map(|&i| sample_grad(shared, dataset, &dataset.samples()[i], lambda))
            .collect::<Result<_>>()?;
        let mut total = Gradients::new();
        let (mut loss, mut mae) = (0.0, 0.0);
        // summed in batch order so results do not depend on thread timing
        for p in &parts {
            total.accumulate(&p.grads)?;
            loss += p.loss;
            mae += p.mae;
        }
        let n = batch.len() as f64;
        total.scale(T::lit(1.0 / n));
        adam_step(&mut model.params, &total, &mut self.adam, self.lr)?;
        self.steps += 1;
        Ok(LossSummary {
            loss: loss / n,
            mae: mae / n,
        })
    }

    /// One shuffled pass over `train`. Stops early at `max_steps`.
    pub fn epoch(
        &mut self,
        model: &mut Model<T>,
        dataset: &Dataset,
        train: &[usize],
        max_steps: Option<usize>,
    ) -> Result<(LossSummary, Option<f64>)> {
        let mut order = train.to_vec();
        order.shuffle(&mut self.rng);
        let (mut loss, mut mae, mut seen) = (0.0, 0.0, 0usize);
        let mut first = None;
        for batch in order.chunks(self.batch_size) {
            if max_steps.is_some_and(|m| self.steps >= m) {
                break;
            }
            let s = self.step(model, dataset, batch)?;
            first.get_or_insert(s.loss);
            loss += s.loss * batch.len() as f64;
            mae += s.mae * batch.len() as f64;
            seen += batch.len();
        }
        let denom = seen.max(1) as f64;
        Ok((
            LossSummary {
                loss: loss / denom,
                mae: mae / denom,
            },
            first,
        ))
    }
}

/// Trains `model` in place for `epochs` epochs at learning rate `lr`.
pub fn train_with<T: Real>(
    model: &mut Model<T>,
    dataset: &Dataset,
    config: &TrainConfig,
    lr: f64,
    epochs: usize,
) -> Result<TrainReport> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(CoatError::Usage("cannot train on an empty dataset".into()));
    }
    let (mut train, val) = dataset.split(config.validation_fraction);
    if train.is_empty() {
        // tiny datasets may hash entirely into validation
        train = (0..dataset.len()).collect();
    }
    let initial_loss = evaluate_loss(model, dataset, &train, config.lambda)?.loss;
    let mut trainer = Trainer::new(config, lr)?;
    let mut history = Vec::with_capacity(epochs);
    let mut first_batch_loss = None;
    for epoch in 0..epochs {
        if config.max_steps.is_some_and(|m| trainer.steps >= m) {
            break;
        }
        let (summary, first) = trainer.epoch(model, dataset, &train, config.max_steps)?;
        if first_batch_loss.is_none() {
            first_batch_loss = first;
        }
        let validation = if val.is_empty() {
            None
        } else {
            Some(evaluate_loss(model, dataset, &val, config.lambda)?)
        };
        history.push(EpochMetrics {
            epoch,
            train: summary,
            validation,
            steps: trainer.steps,
        });
    }
    Ok(TrainReport {
        initial_loss,
        first_batch_loss: first_batch_loss.unwrap_or(initial_loss),
        history,
        steps: trainer.steps,
        train_samples: train.len(),
        validation_samples: val.len(),
    })
}

/// Initial training: `config.epochs` epochs at `config.lr`.
pub fn train<T: Real>(model: &mut Model<T>, dataset: &Dataset, config: &TrainConfig) -> Result<TrainReport> {
    train_with(model, dataset, config, config.lr, config.epochs)
}
