//! Mini-batch training with early stopping.
//!
//! Each epoch shuffles the sequence order with a seeded PRNG, walks batches
//! of `batch_size` (the last partial batch is kept), and applies one Adam
//! step per batch on the mean gradient. Per-sequence gradients are computed
//! independently (optionally in parallel) and summed in a fixed order, so
//! parallel and serial runs produce bit-identical parameters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    adam_step, backward, forward, mse_loss, predict, AdamConfig, AdamState, NetworkDims,
    NetworkParams,
};
use crate::dataset::TrainingSequence;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Global-norm gradient clip; disabled by default.
    pub clip_norm: Option<f64>,
    pub threads: usize,
    /// Parameters to continue from instead of a fresh seeded init.
    pub initial_params: Option<NetworkParams<f32>>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 512,
            patience: 2,
            max_epochs: 100,
            seed: 0,
            clip_norm: None,
            threads: 1,
            initial_params: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters from the best-validation epoch.
    pub params: NetworkParams<f32>,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    /// Optimizer steps executed up to and including the best epoch.
    pub steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopAction {
    Continue,
    Stop,
}

/// Validation-loss early stopping: stop once the loss has failed to improve
/// for `patience` consecutive epochs.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    streak: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            streak: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopAction {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.streak = 0;
            StopAction::Continue
        } else {
            self.streak += 1;
            if self.streak >= self.patience {
                StopAction::Stop
            } else {
                StopAction::Continue
            }
        }
    }

    /// True when `epoch` set a new best.
    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

fn sequence_loss_and_grad(
    params: &NetworkParams<f32>,
    seq: &TrainingSequence,
) -> (f64, NetworkParams<f32>) {
    let (preds, cache) = forward(params, &seq.input);
    let loss = mse_loss(&preds, &seq.target) as f64;
    let grads = backward(params, &cache, &seq.target);
    (loss, grads)
}

fn validation_loss(
    params: &NetworkParams<f32>,
    val_set: &[TrainingSequence],
    pool: Option<&rayon::ThreadPool>,
) -> f64 {
    let losses: Vec<f64> = match pool {
        Some(pool) => pool.install(|| {
            val_set
                .par_iter()
                .map(|s| mse_loss(&predict(params, &s.input), &s.target) as f64)
                .collect()
        }),
        None => val_set
            .iter()
            .map(|s| mse_loss(&predict(params, &s.input), &s.target) as f64)
            .collect(),
    };
    losses.iter().sum::<f64>() / losses.len() as f64
}

/// Train on shuffled mini-batches until validation MSE stops improving.
pub fn train(
    dims: NetworkDims,
    train_set: &[TrainingSequence],
    val_set: &[TrainingSequence],
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config(
            "training and validation splits must be non-empty".into(),
        ));
    }
    if opts.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    for seq in train_set.iter().take(1).chain(val_set.iter().take(1)) {
        if seq.input.len() != seq.target.len() * dims.input {
            return Err(Error::ShapeMismatch(format!(
                "sequence input width {} does not match network input {}",
                seq.input.len() / seq.target.len().max(1),
                dims.input
            )));
        }
    }

    let mut params = match &opts.initial_params {
        Some(p) => {
            if p.dims() != dims {
                return Err(Error::ShapeMismatch(format!(
                    "initial parameters have dims {:?}, requested {:?}",
                    p.dims(),
                    dims
                )));
            }
            p.clone()
        }
        None => NetworkParams::<f32>::init(dims, derive_seed(opts.seed, &[0]))?,
    };
    let mut adam = AdamState::<f32>::new(params.data().len());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &[1]));

    let pool = if opts.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut stopper = EarlyStopping::new(opts.patience.max(1));
    let mut best_params = params.clone();
    let mut best_steps = 0u64;
    let mut history = Vec::new();
    let mut indices: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=opts.max_epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0f64;

        for batch in indices.chunks(opts.batch_size) {
            let results: Vec<(f64, NetworkParams<f32>)> = match &pool {
                Some(pool) => pool.install(|| {
                    batch
                        .par_iter()
                        .map(|&i| sequence_loss_and_grad(&params, &train_set[i]))
                        .collect()
                }),
                None => batch
                    .iter()
                    .map(|&i| sequence_loss_and_grad(&params, &train_set[i]))
                    .collect(),
            };

            let mut batch_grad = NetworkParams::<f32>::zeros(dims);
            let mut batch_loss = 0.0f64;
            for (loss, grad) in &results {
                batch_loss += loss;
                for (acc, g) in batch_grad.data_mut().iter_mut().zip(grad.data()) {
                    *acc += *g;
                }
            }
            let inv = 1.0f32 / batch.len() as f32;
            for g in batch_grad.data_mut() {
                *g *= inv;
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite batch loss at epoch {epoch} step {}",
                    adam.step_count() + 1
                )));
            }
            loss_sum += batch_loss * batch.len() as f64;

            if let Some(max_norm) = opts.clip_norm {
                let norm = batch_grad
                    .data()
                    .iter()
                    .map(|&g| (g as f64) * (g as f64))
                    .sum::<f64>()
                    .sqrt();
                if norm > max_norm {
                    let scale = (max_norm / norm) as f32;
                    for g in batch_grad.data_mut() {
                        *g *= scale;
                    }
                }
            }

            adam_step(&mut params, &batch_grad, &mut adam, &opts.adam);
        }

        let train_mse = loss_sum / train_set.len() as f64;
        let val_mse = validation_loss(&params, val_set, pool.as_ref());
        if !val_mse.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        history.push(EpochStats {
            epoch,
            train_mse,
            val_mse,
        });
        log::info!("epoch {epoch}: train mse {train_mse:.6}, validation mse {val_mse:.6}");

        let action = stopper.observe(epoch, val_mse);
        if stopper.improved_at(epoch) {
            best_params = params.clone();
            best_steps = adam.step_count();
        }
        if action == StopAction::Stop {
            break;
        }
    }

    Ok(TrainOutcome {
        params: best_params,
        history,
        best_epoch: stopper.best_epoch(),
        steps: best_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_sequence(rng: &mut ChaCha8Rng, len: usize, target_fn: impl Fn(usize) -> f32) -> TrainingSequence {
        let input: Vec<f32> = (0..len * 3).map(|_| rng.random_range(0.0..2.0)).collect();
        TrainingSequence {
            k: 0,
            l_end: (len - 1) as u32,
            mu: 1.0,
            input,
            target: (0..len).map(target_fn).collect(),
        }
    }

    #[test]
    fn early_stopping_patience_two() {
        let mut es = EarlyStopping::new(2);
        assert_eq!(es.observe(1, 1.0), StopAction::Continue);
        assert_eq!(es.observe(2, 0.9), StopAction::Continue);
        assert_eq!(es.observe(3, 0.95), StopAction::Continue);
        assert_eq!(es.observe(4, 0.97), StopAction::Stop);
        assert_eq!(es.best_epoch(), 2);
    }

    #[test]
    fn overfits_single_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seq = toy_sequence(&mut rng, 16, |t| (t as f32 * 0.3).sin());
        // One sequence per epoch = one optimizer step per epoch, so the
        // default learning rate cannot cover enough ground in 200 steps.
        let opts = TrainOptions {
            adam: AdamConfig {
                learning_rate: 0.01,
                ..AdamConfig::default()
            },
            batch_size: 1,
            patience: 200,
            max_epochs: 200,
            seed: 7,
            ..TrainOptions::default()
        };
        let out = train(
            NetworkDims::new(3, 8, 4),
            std::slice::from_ref(&seq),
            std::slice::from_ref(&seq),
            &opts,
        )
        .unwrap();
        let final_mse = out.history.last().unwrap().train_mse;
        let best_mse = out
            .history
            .iter()
            .map(|h| h.train_mse)
            .fold(f64::INFINITY, f64::min);
        assert!(
            best_mse < 1e-3,
            "single-sequence train MSE stuck at {final_mse}"
        );
    }

    #[test]
    fn zero_targets_loss_non_increasing_early() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seqs: Vec<TrainingSequence> =
            (0..32).map(|_| toy_sequence(&mut rng, 12, |_| 0.0)).collect();
        let opts = TrainOptions {
            batch_size: 8,
            patience: 10,
            max_epochs: 3,
            seed: 5,
            ..TrainOptions::default()
        };
        let out = train(NetworkDims::new(3, 6, 4), &seqs, &seqs[..4], &opts).unwrap();
        assert!(out.history.len() >= 3);
        assert!(out.history[1].train_mse <= out.history[0].train_mse);
        assert!(out.history[2].train_mse <= out.history[1].train_mse);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let seqs: Vec<TrainingSequence> = (0..24)
            .map(|_| toy_sequence(&mut rng, 10, |t| 0.1 * t as f32))
            .collect();
        let opts = TrainOptions {
            batch_size: 7,
            patience: 5,
            max_epochs: 3,
            seed: 99,
            ..TrainOptions::default()
        };
        let dims = NetworkDims::new(3, 5, 4);
        let a = train(dims, &seqs, &seqs[..5], &opts).unwrap();
        let b = train(dims, &seqs, &seqs[..5], &opts).unwrap();
        let bits_a: Vec<u32> = a.params.data().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u32> = b.params.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn first_adam_step_decreases_loss() {
        let dims = NetworkDims::new(3, 4, 3);
        let params = NetworkParams::<f32>::init(dims, 55).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let seq = toy_sequence(&mut rng, 8, |t| 0.5 + 0.1 * t as f32);

        let (preds, cache) = forward(&params, &seq.input);
        let loss_before = mse_loss(&preds, &seq.target);
        let grads = backward(&params, &cache, &seq.target);
        assert!(grads.data().iter().any(|&g| g != 0.0));

        let mut updated = params.clone();
        let mut adam = AdamState::new(updated.data().len());
        adam_step(&mut updated, &grads, &mut adam, &AdamConfig::default());
        let loss_after = mse_loss(&predict(&updated, &seq.input), &seq.target);
        assert!(loss_after < loss_before);
    }

    #[test]
    fn non_finite_data_reports_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut seq = toy_sequence(&mut rng, 8, |_| 0.0);
        seq.input[0] = f32::NAN;
        let opts = TrainOptions {
            batch_size: 1,
            max_epochs: 2,
            ..TrainOptions::default()
        };
        let err = train(
            NetworkDims::new(3, 4, 3),
            std::slice::from_ref(&seq),
            std::slice::from_ref(&seq),
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    #[test]
    fn empty_split_rejected() {
        let opts = TrainOptions::default();
        let err = train(NetworkDims::new(3, 4, 3), &[], &[], &opts).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
