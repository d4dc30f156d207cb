//! Shared mini-batch training loop for the gradient-based model families.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Sample;
use crate::models::adam::{adam_step, AdamHyperParams, AdamState};
use crate::util::derive_seed;

/// A network whose loss gradient is computed analytically over a flat
/// parameter vector. Implemented by the MLP, RNN and LSTM models; also the
/// interface the finite-difference gradient checks drive.
pub trait GradientNet {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// Prediction for one window of per-year feature vectors.
    fn predict_window(&self, window: &[Vec<f64>]) -> f64;
    /// Mean squared error over the batch; gradients are accumulated into
    /// `grad`, which the caller provides zeroed.
    fn batch_loss_grad(&self, batch: &[(&[Vec<f64>], f64)], grad: &mut [f64]) -> f64;
}

/// How training decides to stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StoppingRule {
    /// Hold out a validation fraction and stop after `patience` epochs
    /// without the validation loss improving by more than `min_delta`.
    ValidationPatience { patience: usize, min_delta: f64 },
    /// Train for exactly this many epochs with no validation holdout.
    FixedEpochs { epochs: usize },
}

/// Options shared by every trainable family. Non-iterative models read only
/// the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub adam: AdamHyperParams,
    pub batch_size: usize,
    /// Hard cap on epochs; `None` leaves the stopping rule unbounded.
    pub max_epochs: Option<usize>,
    pub stopping: StoppingRule,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            adam: AdamHyperParams::default(),
            batch_size: 200,
            max_epochs: None,
            stopping: StoppingRule::ValidationPatience {
                patience: 10,
                min_delta: 1e-4,
            },
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Fixed-epoch options for final comparison runs.
    pub fn fixed(epochs: usize, seed: u64) -> Self {
        Self {
            stopping: StoppingRule::FixedEpochs { epochs },
            seed,
            ..Self::default()
        }
    }

    /// Patience-based options used during model selection: 15 epochs without
    /// improvement for the recurrent families, 10 with a small improvement
    /// tolerance for the MLP.
    pub fn selection(family: crate::models::ModelFamily, seed: u64) -> Self {
        use crate::models::ModelFamily;
        let stopping = match family {
            ModelFamily::Rnn | ModelFamily::Lstm => StoppingRule::ValidationPatience {
                patience: 15,
                min_delta: 0.0,
            },
            _ => StoppingRule::ValidationPatience {
                patience: 10,
                min_delta: 1e-4,
            },
        };
        Self {
            stopping,
            seed,
            ..Self::default()
        }
    }
}

/// Bookkeeping from a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Total epochs executed.
    pub epochs_run: usize,
    /// Epoch (0-based) with the best validation loss, in patience mode.
    pub best_epoch: Option<usize>,
    /// Epochs counted as "used": up to the best validation epoch in patience
    /// mode, all epochs in fixed mode. Feeds the fixed-epoch final runs.
    pub epochs_used: usize,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
}

pub(crate) fn train_gradient_net<N: GradientNet>(
    net: &mut N,
    samples: &[Sample],
    opts: &TrainOptions,
) -> Result<TrainingMeta> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::InvalidConfig("no training samples".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 0x7472_6169));

    // Validation holdout, only in patience mode.
    let (train_idx, val_idx): (Vec<usize>, Vec<usize>) = match opts.stopping {
        StoppingRule::ValidationPatience { .. } => {
            if n < 2 {
                return Err(Error::InvalidConfig(
                    "validation-based early stopping needs at least 2 samples".into(),
                ));
            }
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng);
            let val_n = ((opts.validation_fraction * n as f64).round() as usize)
                .clamp(1, n - 1);
            (indices[val_n..].to_vec(), indices[..val_n].to_vec())
        }
        StoppingRule::FixedEpochs { .. } => ((0..n).collect(), Vec::new()),
    };

    let param_len = net.params().len();
    let mut adam_state = AdamState::new(param_len);
    let mut grad = vec![0.0; param_len];
    let mut order = train_idx.clone();

    let mut best_val = f64::INFINITY;
    let mut best_epoch: Option<usize> = None;
    let mut best_params: Option<Vec<f64>> = None;
    let mut last_train_loss = None;
    let mut last_val_loss = None;
    let mut epochs_run = 0;

    let epoch_cap = match (opts.stopping, opts.max_epochs) {
        (StoppingRule::FixedEpochs { epochs }, Some(cap)) => epochs.min(cap),
        (StoppingRule::FixedEpochs { epochs }, None) => epochs,
        (_, Some(cap)) => cap,
        (_, None) => usize::MAX,
    };

    let mut epoch = 0;
    while epoch < epoch_cap {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0f64;
        for chunk in order.chunks(opts.batch_size) {
            let batch: Vec<(&[Vec<f64>], f64)> = chunk
                .iter()
                .map(|&i| (samples[i].inputs.as_slice(), samples[i].target))
                .collect();
            grad.fill(0.0);
            let loss = net.batch_loss_grad(&batch, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam_step(net.params_mut(), &grad, &mut adam_state, &opts.adam);
            epoch_loss += loss;
            batches += 1.0;
        }
        last_train_loss = Some(epoch_loss / batches.max(1.0));
        epochs_run = epoch + 1;

        if let StoppingRule::ValidationPatience {
            patience,
            min_delta,
        } = opts.stopping
        {
            let val_loss = mean_squared_error_on(net, samples, &val_idx);
            if !val_loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            last_val_loss = Some(val_loss);
            if best_val - val_loss > min_delta {
                best_val = val_loss;
                best_epoch = Some(epoch);
                best_params = Some(net.params().to_vec());
            }
            let since_best = epoch - best_epoch.unwrap_or(0);
            if best_epoch.is_some() && since_best >= patience {
                break;
            }
            // No improving epoch ever recorded counts from epoch 0.
            if best_epoch.is_none() && epoch + 1 >= patience {
                break;
            }
        }
        epoch += 1;
    }

    if let Some(best) = best_params {
        net.params_mut().copy_from_slice(&best);
    }

    let epochs_used = match opts.stopping {
        StoppingRule::ValidationPatience { .. } => best_epoch.map(|e| e + 1).unwrap_or(epochs_run),
        StoppingRule::FixedEpochs { .. } => epochs_run,
    };

    Ok(TrainingMeta {
        epochs_run,
        best_epoch,
        epochs_used,
        final_train_loss: last_train_loss,
        final_val_loss: last_val_loss,
    })
}

fn mean_squared_error_on<N: GradientNet>(net: &N, samples: &[Sample], idx: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in idx {
        let err = net.predict_window(&samples[i].inputs) - samples[i].target;
        total += err * err;
    }
    total / idx.len() as f64
}
