//! Mini-batch training loops, learning-curve recording, K-fold
//! cross-validation and held-out evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{batch_iter, kfold_split, Dataset, Normalizer};
use crate::error::{Error, Result};
use crate::network::{
    backward_with_loss, forward, loss_mae, penalty, predict, LayerSpec, LossKind, Mode, Network,
    RegConfig,
};
use crate::optimize::{Optimizer, OptimizerConfig};
use crate::rng::derive_seed;
use crate::tensor::{Matrix, ShapeError, Vector};

const DROPOUT_STREAM: u64 = 0xd209_0f7a;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub reg: RegConfig,
    #[serde(default)]
    pub loss: LossKind,
    /// Base seed for per-epoch batch order and dropout masks.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            optimizer: OptimizerConfig::default(),
            reg: RegConfig::NONE,
            loss: LossKind::Mse,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        self.optimizer.validate()?;
        self.reg.validate()
    }
}

/// Normalized feature rows with their SOC targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    pub x: Matrix,
    pub y: Vector,
}

impl Examples {
    pub fn new(x: Matrix, y: Vector) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(ShapeError::new("Examples", x.shape(), y.len()).into());
        }
        Ok(Examples { x, y })
    }

    pub fn from_dataset(d: &Dataset, norm: &Normalizer) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::config(format!("dataset '{}' is empty", d.name)));
        }
        Examples::new(norm.apply(d)?, d.targets())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Mean absolute error, in the targets' units (SOC percentage points).
pub fn mae(pred: &Vector, target: &Vector) -> Result<f64> {
    loss_mae(pred, target)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// Objective (data loss plus weight penalty), batch-size weighted.
    pub loss: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_mae: f64,
    pub val_loss: f64,
    pub val_mae: f64,
}

impl EpochRecord {
    /// Generalization gap `val_mae − train_mae`.
    pub fn gap(&self) -> f64 {
        self.val_mae - self.train_mae
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub records: Vec<EpochRecord>,
}

impl RunHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn final_val_mae(&self) -> f64 {
        self.last().map_or(f64::NAN, |r| r.val_mae)
    }

    pub fn best_val_mae(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.val_mae)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(EpochRecord::gap).collect()
    }
}

fn check_finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} became {v}")))
    }
}

/// One pass over `train` in a seed-determined order: forward (train mode),
/// backward with the configured penalty, optimizer step, per batch.
///
/// `on_batch` receives the row indices (into `train`) of every batch before
/// it is trained on.
pub fn train_epoch(
    net: &mut Network,
    opt: &mut Optimizer,
    train: &Examples,
    cfg: &TrainConfig,
    epoch: usize,
    on_batch: &mut dyn FnMut(&[usize]),
) -> Result<EpochMetrics> {
    let order_seed = derive_seed(cfg.shuffle_seed, epoch as u64);
    let dropout_base = derive_seed(cfg.shuffle_seed ^ DROPOUT_STREAM, epoch as u64);
    let (mut loss_sum, mut mae_sum, mut seen) = (0.0, 0.0, 0usize);
    for (b, batch) in batch_iter(&train.x, &train.y, cfg.batch_size, Some(order_seed))?.enumerate() {
        on_batch(&batch.rows);
        let (pred, cache) = forward(net, &batch.x, Mode::Train, derive_seed(dropout_base, b as u64))?;
        let (grads, objective) = backward_with_loss(net, &cache, &batch.y, &cfg.reg, cfg.loss)?;
        check_finite("training loss", objective)?;
        let n = batch.y.len();
        loss_sum += objective * n as f64;
        mae_sum += mae(&pred, &batch.y)? * n as f64;
        seen += n;
        opt.step(net, &grads)?;
    }
    Ok(EpochMetrics {
        loss: loss_sum / seen as f64,
        mae: mae_sum / seen as f64,
    })
}

/// Inference-mode loss (data loss plus penalty) and MAE. Never touches the
/// parameters.
pub fn evaluate_examples(net: &Network, data: &Examples, cfg: &TrainConfig) -> Result<EpochMetrics> {
    if data.is_empty() {
        return Err(Error::config("cannot evaluate on an empty set"));
    }
    let pred = predict(net, &data.x)?;
    let loss = cfg.loss.value(&pred, &data.y)? + penalty(net, &cfg.reg);
    Ok(EpochMetrics {
        loss: check_finite("validation loss", loss)?,
        mae: mae(&pred, &data.y)?,
    })
}

/// Train for `cfg.epochs` epochs with a fresh optimizer, evaluating on `val`
/// after each one.
pub fn fit(net: &mut Network, train: &Examples, val: &Examples, cfg: &TrainConfig) -> Result<RunHistory> {
    fit_traced(net, train, val, cfg, &mut |_| {})
}

pub fn fit_traced(
    net: &mut Network,
    train: &Examples,
    val: &Examples,
    cfg: &TrainConfig,
    on_batch: &mut dyn FnMut(&[usize]),
) -> Result<RunHistory> {
    cfg.validate()?;
    if val.is_empty() || train.is_empty() {
        return Err(Error::config("training and validation sets must be non-empty"));
    }
    let mut opt = Optimizer::new(cfg.optimizer, net)?;
    let mut history = RunHistory::default();
    for epoch in 0..cfg.epochs {
        let tr = train_epoch(net, &mut opt, train, cfg, epoch, on_batch)?;
        let va = evaluate_examples(net, val, cfg)?;
        log::debug!(
            "epoch {:>3}: train loss {:.4} mae {:.4} | val loss {:.4} mae {:.4}",
            epoch + 1,
            tr.loss,
            tr.mae,
            va.loss,
            va.mae
        );
        history.records.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: tr.loss,
            train_mae: tr.mae,
            val_loss: va.loss,
            val_mae: va.mae,
        });
    }
    Ok(history)
}

/// Train on all of `train` without a validation pass, for a final model
/// whose hyperparameters were already chosen. Returns per-epoch training
/// metrics.
pub fn fit_full(net: &mut Network, train: &Examples, cfg: &TrainConfig) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let mut opt = Optimizer::new(cfg.optimizer, net)?;
    (0..cfg.epochs)
        .map(|epoch| train_epoch(net, &mut opt, train, cfg, epoch, &mut |_| {}))
        .collect()
}

/// Test-set MAE of raw predictions (no output clamp).
pub fn evaluate(net: &Network, norm: &Normalizer, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::config("test set is empty"));
    }
    let x = norm.apply(test)?;
    let pred = predict(net, &x)?;
    mae(&pred, &test.targets())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub k: usize,
    pub histories: Vec<RunHistory>,
    pub final_val_mae: Vec<f64>,
    pub best_val_mae: Vec<f64>,
    pub mean_val_mae: f64,
    /// Population standard deviation across folds.
    pub std_val_mae: f64,
    pub mean_best_val_mae: f64,
    pub std_best_val_mae: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct CvOptions {
    pub k: usize,
    /// Seed for the fold assignment and per-fold weight init.
    pub seed: u64,
    /// Worker threads; folds beyond this count queue.
    pub jobs: usize,
}

/// K-fold cross-validation over `train`: for each fold a fresh network is
/// initialized, the normalizer is fitted on the remaining folds only, and
/// the model is trained on those folds and scored on the held-out one.
pub fn cross_validate(train: &Dataset, specs: &[LayerSpec], cfg: &TrainConfig, opts: CvOptions) -> Result<CVReport> {
    cross_validate_traced(train, specs, cfg, opts, &|_, _| {})
}

/// As [`cross_validate`]; `trace(fold, rows)` sees the dataset row indices of
/// every training batch.
pub fn cross_validate_traced(
    train: &Dataset,
    specs: &[LayerSpec],
    cfg: &TrainConfig,
    opts: CvOptions,
    trace: &(dyn Fn(usize, &[usize]) + Sync),
) -> Result<CVReport> {
    cfg.validate()?;
    let assignment = kfold_split(train.len(), opts.k, opts.seed)?;
    let run_fold = |fold: usize| -> Result<RunHistory> {
        let train_rows = assignment.training_indices(fold);
        let val_rows = assignment.validation_indices(fold);
        let fold_train = train.subset(format!("fold{fold}-train"), &train_rows);
        let fold_val = train.subset(format!("fold{fold}-val"), &val_rows);
        let norm = Normalizer::fit(&fold_train)?;
        let tr = Examples::from_dataset(&fold_train, &norm)?;
        let va = Examples::from_dataset(&fold_val, &norm)?;
        let mut net = Network::init(specs, derive_seed(opts.seed, fold as u64))?;
        let fold_cfg = TrainConfig {
            shuffle_seed: derive_seed(cfg.shuffle_seed, fold as u64),
            ..*cfg
        };
        let mut mapped = Vec::new();
        let history = fit_traced(&mut net, &tr, &va, &fold_cfg, &mut |rows| {
            mapped.clear();
            mapped.extend(rows.iter().map(|&r| train_rows[r]));
            trace(fold, &mapped);
        })?;
        log::info!("fold {fold}: final val MAE {:.4}", history.final_val_mae());
        Ok(history)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let histories: Vec<RunHistory> = pool.install(|| {
        (0..opts.k)
            .into_par_iter()
            .map(run_fold)
            .collect::<Result<Vec<_>>>()
    })?;

    let final_val_mae: Vec<f64> = histories.iter().map(RunHistory::final_val_mae).collect();
    let best_val_mae: Vec<f64> = histories.iter().map(RunHistory::best_val_mae).collect();
    let (mean_val_mae, std_val_mae) = mean_std(&final_val_mae);
    let (mean_best_val_mae, std_best_val_mae) = mean_std(&best_val_mae);
    Ok(CVReport {
        k: opts.k,
        histories,
        final_val_mae,
        best_val_mae,
        mean_val_mae,
        std_val_mae,
        mean_best_val_mae,
        std_best_val_mae,
    })
}
