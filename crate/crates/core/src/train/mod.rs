//! Mini-batch training with Adam, early stopping on validation MAE, and
//! evaluation against the regression metric suite.

mod adam;
mod data;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::metrics::RegressionMetrics;
use crate::models::{ModelConfig, ModelParams};
use crate::rng;

pub use adam::Adam;
pub use data::{batch_order, collate, make_batches, prepare_dataset, Example, PreparedData};

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mse,
    Mae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-MAE improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            loss: LossKind::Mse,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("adam eps must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        Ok(())
    }
}

// Independent RNG streams derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_DROPOUT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-example training loss over the epoch.
    pub train_loss: f64,
    pub val: RegressionMetrics,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub model: String,
    pub param_count: usize,
    pub seed: u64,
    /// SHA-256 of the canonical JSON of model and training configs.
    pub config_hash: String,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Metrics of the retained (best-validation) parameters.
    pub train: RegressionMetrics,
    pub val: RegressionMetrics,
    pub test: Option<RegressionMetrics>,
    pub wall_time_s: f64,
}

impl RunHistory {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub history: RunHistory,
}

/// Hex SHA-256 over `{"model": .., "train": ..}` serialized with fields in
/// declaration order, so the digest is stable across platforms.
pub fn config_hash(model: &ModelConfig, train: &TrainConfig) -> String {
    #[derive(Serialize)]
    struct Canon<'a> {
        model: &'a ModelConfig,
        train: &'a TrainConfig,
    }
    let json = serde_json::to_vec(&Canon { model, train }).expect("configs serialize");
    hex::encode(Sha256::digest(json))
}

/// Eval-mode predictions over `examples`, in order.
pub fn predict(model: &ModelConfig, params: &ModelParams<f32>, examples: &[Example]) -> Result<Vec<f64>> {
    const CHUNK: usize = 256;
    let mut out = Vec::with_capacity(examples.len());
    let idx: Vec<usize> = (0..examples.len()).collect();
    for chunk in idx.chunks(CHUNK) {
        out.extend(model.predict(params, &collate::<f32>(examples, chunk)?)?);
    }
    Ok(out)
}

pub fn evaluate(model: &ModelConfig, params: &ModelParams<f32>, examples: &[Example]) -> Result<RegressionMetrics> {
    let pred = predict(model, params, examples)?;
    let y: Vec<f64> = examples.iter().map(|e| e.label).collect();
    RegressionMetrics::compute(&y, &pred)
}

/// Trains `model` on `data.train`, keeping the parameters with the lowest
/// validation MAE. Deterministic for a fixed `config.seed`.
pub fn train(model: &ModelConfig, data: &PreparedData, config: &TrainConfig) -> Result<TrainOutcome> {
    model.validate()?;
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::Dataset("training split is empty".into()));
    }
    if data.val.len() < 2 {
        return Err(Error::Dataset("validation split needs at least 2 examples".into()));
    }
    let want = model.kind().representation();
    if let Some(e) = data.train.iter().chain(&data.val).chain(&data.test).find(|e| e.input.representation() != want)
    {
        return Err(Error::Config(format!(
            "model '{}' needs {want} inputs but '{}' is {}",
            model.kind(),
            e.id,
            e.input.representation()
        )));
    }

    let start = Instant::now();
    let mut params: ModelParams<f32> = model.init_params(rng::derive_seed(config.seed, STREAM_INIT))?;
    let mut opt = Adam::new(&params, config.learning_rate, config.beta1, config.beta2, config.eps);
    let mut dropout_rng = rng::seeded(rng::derive_seed(config.seed, STREAM_DROPOUT));
    let shuffle_seed = rng::derive_seed(config.seed, STREAM_SHUFFLE);
    let expected = model.param_count();

    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, ModelParams<f32>)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 0..config.max_epochs {
        let mut loss_sum = 0.0;
        for (idx, batch) in make_batches::<f32>(&data.train, config.batch_size, shuffle_seed, epoch)? {
            let targets: Vec<f32> = idx.iter().map(|&i| data.train[i].label as f32).collect();
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let pred = model.forward(&mut tape, &bound, &batch, true, &mut dropout_rng)?;
            let loss = match config.loss {
                LossKind::Mse => tape.mse_loss(pred, &targets)?,
                LossKind::Mae => tape.mae_loss(pred, &targets)?,
            };
            let value = tape.value(loss).data()[0] as f64;
            if !value.is_finite() {
                return Err(Error::Dataset(format!("non-finite training loss at epoch {epoch}")));
            }
            loss_sum += value * idx.len() as f64;
            let grads = tape.backward(loss)?;
            let touched = opt.step(&mut params, bound.vars(), &grads);
            debug_assert_eq!(touched, expected);
        }
        let val = evaluate(model, &params, &data.val)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            val: val.clone(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        if best.as_ref().is_none_or(|(mae, _, _)| val.mae < *mae) {
            best = Some((val.mae, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    let history = RunHistory {
        model: model.kind().to_string(),
        param_count: expected,
        seed: config.seed,
        config_hash: config_hash(model, config),
        train: evaluate(model, &params, &data.train)?,
        val: evaluate(model, &params, &data.val)?,
        test: if data.test.len() >= 2 { Some(evaluate(model, &params, &data.test)?) } else { None },
        epochs,
        best_epoch,
        stopped_early,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { params, history })
}
