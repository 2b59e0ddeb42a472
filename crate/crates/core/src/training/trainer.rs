use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerKind};
use super::schedule::{PlateauEvent, PlateauScheduler};
use crate::data::{PreparedData, WindowedSample, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::metrics::mse;
use crate::models::{svr_fit, Model, ModelSpec, NeuralNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub initial_lr: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub max_epochs: usize,
    pub min_lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Stop as soon as an epoch's training MSE falls below this value.
    pub stop_train_mse: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            initial_lr: 0.01,
            plateau_factor: 0.1,
            plateau_patience: 50,
            max_epochs: 200,
            min_lr: 1e-6,
            batch_size: 32,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            stop_train_mse: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad(format!(
                "initial_lr must be positive, got {}",
                self.initial_lr
            ));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!(
                "plateau_factor must lie in (0, 1), got {}",
                self.plateau_factor
            ));
        }
        if self.plateau_patience == 0 {
            return bad("plateau_patience must be at least 1".into());
        }
        if !(self.min_lr > 0.0) || self.min_lr > self.initial_lr {
            return bad(format!(
                "min_lr must lie in (0, initial_lr], got {}",
                self.min_lr
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    /// Rate used during this epoch.
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn train_mse(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_mse).collect()
    }

    pub fn val_mse(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_mse).collect()
    }

    pub fn lrs(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.lr).collect()
    }

    pub fn total_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Nothing to iterate: zero epochs or a model without epochs.
    NoEpochs,
    MaxEpochs,
    LearningRateExhausted,
    TrainTarget,
}

/// What an epoch observer sees: the training-mode predictions in the order
/// they were made and the matching targets.
pub struct EpochView<'a> {
    pub record: &'a EpochRecord,
    pub predictions: &'a [f64],
    pub targets: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub history: TrainingHistory,
    /// 1-based epoch whose parameters were kept; 0 when none ran.
    pub best_epoch: usize,
    pub best_val_mse: Option<f64>,
    pub stop: StopReason,
}

fn check_samples(net: &NeuralNet, samples: &[WindowedSample], what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Sizing(format!("{what} set is empty")));
    }
    if let Some(s) = samples.iter().find(|s| s.inputs.len() != net.input_len()) {
        return Err(Error::shape(format!(
            "{what} sample has {} values, model expects {}",
            s.inputs.len(),
            net.input_len()
        )));
    }
    Ok(())
}

/// Mean squared error of `net` over `samples` in scaled units.
pub fn evaluate_mse(net: &NeuralNet, samples: &[WindowedSample]) -> Result<f64> {
    let preds = samples
        .iter()
        .map(|s| net.predict(&s.inputs))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    mse(&targets, &preds)
}

fn snapshot(net: &NeuralNet) -> Vec<Vec<f64>> {
    net.params().iter().map(|p| p.values().to_vec()).collect()
}

fn restore(net: &mut NeuralNet, saved: &[Vec<f64>]) {
    for (p, s) in net.params_mut().into_iter().zip(saved) {
        p.values_mut().copy_from_slice(s);
    }
}

/// Minibatch training with MSE loss, a plateau schedule and best-validation
/// checkpointing. On return `net` holds the parameters of the best epoch.
pub fn train_network(
    net: &mut NeuralNet,
    train: &[WindowedSample],
    validation: &[WindowedSample],
    config: &TrainingConfig,
    mut observer: Option<&mut dyn FnMut(&EpochView<'_>)>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut outcome = TrainOutcome {
        history: TrainingHistory::default(),
        best_epoch: 0,
        best_val_mse: None,
        stop: StopReason::NoEpochs,
    };
    if config.max_epochs == 0 {
        return Ok(outcome);
    }
    check_samples(net, train, "training")?;
    check_samples(net, validation, "validation")?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut optimizer = Optimizer::new(config.optimizer, config.adam_beta1, config.adam_beta2);
    let mut scheduler = PlateauScheduler::new(
        config.initial_lr,
        config.plateau_factor,
        config.plateau_patience,
        config.min_lr,
    );
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    outcome.stop = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let lr = scheduler.lr();
        order.shuffle(&mut rng);
        let mut predictions = Vec::with_capacity(train.len());
        let mut targets = Vec::with_capacity(train.len());

        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            net.zero_grad();
            let scale = 2.0 / chunk.len() as f64;
            for &i in chunk {
                let sample = &train[i];
                let y = net.forward_train(&sample.inputs)?;
                let err = y - sample.target;
                if !(err * err).is_finite() {
                    return Err(Error::Training {
                        epoch,
                        batch: batch + 1,
                        lr,
                        reason: format!("non-finite loss (prediction {y})"),
                    });
                }
                net.backward(scale * err)?;
                predictions.push(y);
                targets.push(sample.target);
            }
            optimizer.step(net.params_mut(), lr)?;
        }

        let train_mse = mse(&targets, &predictions)?;
        let val_mse = evaluate_mse(net, validation)?;
        if !val_mse.is_finite() {
            return Err(Error::Training {
                epoch,
                batch: order.len().div_ceil(config.batch_size),
                lr,
                reason: "non-finite validation loss".into(),
            });
        }
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::debug!("epoch {epoch}: train {train_mse:.6e} val {val_mse:.6e} lr {lr:e}");
        outcome.history.epochs.push(record);
        if let Some(obs) = observer.as_mut() {
            obs(&EpochView {
                record: &record,
                predictions: &predictions,
                targets: &targets,
            });
        }

        if best.as_ref().is_none_or(|(b, _)| val_mse < *b) {
            best = Some((val_mse, snapshot(net)));
            outcome.best_epoch = epoch;
        }

        if config.stop_train_mse.is_some_and(|t| train_mse < t) {
            outcome.stop = StopReason::TrainTarget;
            break;
        }
        match scheduler.observe(val_mse) {
            PlateauEvent::Reduced { from, to } => {
                log::info!("epoch {epoch}: learning rate {from:e} -> {to:e}")
            }
            PlateauEvent::Exhausted => {
                log::info!(
                    "epoch {epoch}: learning rate at floor {:e}, stopping",
                    config.min_lr
                );
                outcome.stop = StopReason::LearningRateExhausted;
                break;
            }
            PlateauEvent::Unchanged => {}
        }
    }

    if let Some((val, params)) = best {
        restore(net, &params);
        outcome.best_val_mse = Some(val);
    }
    Ok(outcome)
}

/// Flattened inputs and scaled targets of a sample set.
pub fn design_matrix(samples: &[WindowedSample]) -> (Vec<Vec<f64>>, Vec<f64>) {
    (
        samples.iter().map(|s| s.inputs.clone()).collect(),
        samples.iter().map(|s| s.target).collect(),
    )
}

/// Builds and fits the model described by `spec` on prepared data.
pub fn fit_model(
    spec: &ModelSpec,
    data: &PreparedData,
    config: &TrainingConfig,
    observer: Option<&mut dyn FnMut(&EpochView<'_>)>,
) -> Result<(Model, TrainOutcome)> {
    let idle = TrainOutcome {
        history: TrainingHistory::default(),
        best_epoch: 0,
        best_val_mse: None,
        stop: StopReason::NoEpochs,
    };
    let n = data.spec.window_n;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = match spec {
        ModelSpec::Naive => return Ok((Model::naive(data.spec.horizon), idle)),
        ModelSpec::Svr(svr) => {
            let (xs, ys) = design_matrix(&data.train);
            let (model, info) = svr_fit(&xs, &ys, svr)?;
            if !info.converged {
                log::warn!(
                    "svr stopped after {} iterations without converging",
                    info.iterations
                );
            }
            return Ok((Model::Svr(model), idle));
        }
        ModelSpec::Fcnn(c) => NeuralNet::fcnn(n, FEATURE_DIM, c, &mut init_rng)?,
        ModelSpec::Lstm(c) => NeuralNet::lstm(n, FEATURE_DIM, c, &mut init_rng)?,
        ModelSpec::Lrcn(c) | ModelSpec::Ilrcn(c) => {
            NeuralNet::lrcn(n, FEATURE_DIM, c, &mut init_rng)?
        }
    };
    let outcome = train_network(&mut net, &data.train, &data.validation, config, observer)?;
    Ok((Model::Neural(net), outcome))
}

#[cfg(test)]
mod tests {
    use chrono::TimeDelta;

    use super::*;
    use crate::data::parse_timestamp;
    use crate::models::LstmConfig;

    fn toy_samples(n: usize, window: usize, features: usize) -> Vec<WindowedSample> {
        let t0 = parse_timestamp("2020-01-01T00:00").unwrap();
        (0..n)
            .map(|i| {
                let inputs: Vec<f64> = (0..window * features)
                    .map(|j| ((i * 7 + j * 3) % 11) as f64 / 10.0)
                    .collect();
                let target = inputs.iter().sum::<f64>() / inputs.len() as f64;
                WindowedSample {
                    inputs,
                    window_n: window,
                    target,
                    target_timestamp: t0 + TimeDelta::hours(i as i64),
                    target_index: i,
                }
            })
            .collect()
    }

    fn small_net() -> NeuralNet {
        let cfg = LstmConfig {
            hidden: vec![4],
            ..Default::default()
        };
        NeuralNet::lstm(3, 5, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    #[test]
    fn zero_epochs_leave_parameters_alone() {
        let mut net = small_net();
        let before = net.clone();
        let data = toy_samples(8, 3, 5);
        let cfg = TrainingConfig {
            max_epochs: 0,
            ..Default::default()
        };
        let out = train_network(&mut net, &data, &data, &cfg, None).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(net, before);
    }

    #[test]
    fn same_seed_same_run() {
        let data = toy_samples(20, 3, 5);
        let cfg = TrainingConfig {
            max_epochs: 15,
            batch_size: 4,
            seed: 9,
            ..Default::default()
        };
        let run = || {
            let mut net = small_net();
            let out = train_network(&mut net, &data[..16], &data[16..], &cfg, None).unwrap();
            (net, out.history.train_mse(), out.history.val_mse())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn accounting_and_checkpoint() {
        let data = toy_samples(24, 3, 5);
        let cfg = TrainingConfig {
            max_epochs: 25,
            batch_size: 5,
            ..Default::default()
        };
        let mut net = small_net();
        let mut recomputed = Vec::new();
        let mut obs = |v: &EpochView<'_>| recomputed.push(mse(v.targets, v.predictions).unwrap());
        let out = train_network(&mut net, &data[..18], &data[18..], &cfg, Some(&mut obs)).unwrap();
        assert_eq!(recomputed, out.history.train_mse());
        let final_val = evaluate_mse(&net, &data[18..]).unwrap();
        assert_eq!(Some(final_val), out.best_val_mse);
        assert!(out.history.val_mse().iter().all(|&v| final_val <= v));
    }

    #[test]
    fn exploding_rate_aborts_with_diagnostics() {
        let data: Vec<WindowedSample> = toy_samples(8, 3, 5)
            .into_iter()
            .map(|mut s| {
                s.target = 1e200;
                s
            })
            .collect();
        let cfg = TrainingConfig {
            max_epochs: 50,
            optimizer: OptimizerKind::Sgd,
            initial_lr: 1e10,
            ..Default::default()
        };
        let mut net = small_net();
        let err = train_network(&mut net, &data, &data, &cfg, None).unwrap_err();
        assert!(matches!(err, Error::Training { epoch: 1, .. }), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        for bad in [
            TrainingConfig {
                plateau_factor: 1.0,
                ..Default::default()
            },
            TrainingConfig {
                plateau_patience: 0,
                ..Default::default()
            },
            TrainingConfig {
                initial_lr: 0.0,
                ..Default::default()
            },
            TrainingConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainingConfig {
                min_lr: 1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
