//! Optimizer, plateau scheduler, early stopping, the training loop and
//! correlation metrics.

use std::io::Write;
use std::path::Path;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::model::mse_loss;
use crate::model::{MixtureInput, MolSetsModel};
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub scheduler_factor: f64,
    pub scheduler_patience: usize,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            weight_decay: 1e-4,
            betas: (0.9, 0.999),
            eps: 1e-8,
            scheduler_factor: 0.5,
            scheduler_patience: 10,
            early_stop_patience: 20,
            max_epochs: 1000,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.betas;
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&b1)
            && (0.0..1.0).contains(&b2)
            && self.eps > 0.0
            && self.scheduler_factor > 0.0
            && self.scheduler_factor < 1.0
            && self.max_epochs > 0
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Data(format!("invalid training configuration {self:?}")))
        }
    }
}

/// AdamW moments, step count and current learning rate.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
    pub lr: f64,
}

impl OptimizerState {
    pub fn new(params: &[Tensor], lr: f64) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
            lr,
        }
    }
}

/// One AdamW update with decoupled weight decay and bias-corrected moments.
pub fn adamw_step(
    state: &mut OptimizerState,
    config: &TrainConfig,
    params: &mut [Tensor],
    grads: &[Tensor],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Model("parameter, gradient and moment counts differ".into()));
    }
    if params
        .iter()
        .zip(grads)
        .zip(&state.m)
        .any(|((p, g), m)| p.shape() != g.shape() || p.shape() != m.shape())
    {
        return Err(Error::Model("gradient shape does not match parameter".into()));
    }
    state.step += 1;
    let (b1, b2) = config.betas;
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    let lr = state.lr;
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let pd = p.data_mut();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..pd.len() {
            let gi = g.data()[i];
            md[i] = b1 * md[i] + (1.0 - b1) * gi;
            vd[i] = b2 * vd[i] + (1.0 - b2) * gi * gi;
            let m_hat = md[i] / c1;
            let v_hat = vd[i] / c2;
            pd[i] -= lr * (m_hat / (v_hat.sqrt() + config.eps) + config.weight_decay * pd[i]);
        }
    }
    Ok(())
}

/// Reduce-on-plateau learning rate schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerState {
    pub lr: f64,
    pub best: f64,
    pub bad_epochs: usize,
    pub factor: f64,
    pub patience: usize,
}

impl SchedulerState {
    pub fn new(lr: f64, factor: f64, patience: usize) -> Self {
        Self {
            lr,
            best: f64::INFINITY,
            bad_epochs: 0,
            factor,
            patience,
        }
    }

    /// Feeds one validation loss; returns true when the rate was reduced.
    pub fn update(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience.max(1) {
            self.lr *= self.factor;
            self.bad_epochs = 0;
            return true;
        }
        false
    }
}

/// Replays a whole validation history through a fresh scheduler and
/// returns the resulting rate.
pub fn scheduler_update(lr: f64, factor: f64, patience: usize, history: &[f64]) -> f64 {
    let mut s = SchedulerState::new(lr, factor, patience);
    for &l in history {
        s.update(l);
    }
    s.lr
}

/// `(stop, best_epoch)`: the first minimum of the history, and whether it
/// is at least `patience` epochs old. Patience 0 behaves as 1.
pub fn early_stopping(history: &[f64], patience: usize) -> (bool, usize) {
    let mut best = 0;
    for (i, &l) in history.iter().enumerate() {
        if l < history[best] {
            best = i;
        }
    }
    if history.is_empty() {
        return (false, 0);
    }
    let since = history.len() - 1 - best;
    (since >= patience.max(1), best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: MolSetsModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Mean squared error of `model` over `examples`.
pub fn evaluate_loss(model: &MolSetsModel, examples: &[(MixtureInput, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for (mix, target) in examples {
        total += (model.predict(mix)? - target).powi(2);
    }
    Ok(total / examples.len() as f64)
}

pub fn train(
    model: MolSetsModel,
    train_set: &[(MixtureInput, f64)],
    val_set: &[(MixtureInput, f64)],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    let mut model = model;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = OptimizerState::new(model.store.tensors(), config.lr);
    let mut sched = SchedulerState::new(config.lr, config.scheduler_factor, config.scheduler_patience);
    let mut best_model = model.clone();
    let mut val_history = Vec::new();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped_early = false;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let epoch_lr = opt.lr;
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&MixtureInput, f64)> =
                chunk.iter().map(|&i| (&train_set[i].0, train_set[i].1)).collect();
            let mut tape = Tape::new();
            let params = model.store.register(&mut tape);
            let loss = model.batch_loss(&mut tape, &params, &batch)?;
            let loss_value = tape.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite training loss {loss_value} at epoch {epoch}, batch {b}, lr {epoch_lr}"
                )));
            }
            let grads = tape.backward(loss)?;
            let grads: Vec<Tensor> = params.iter().map(|&p| grads.get(&tape, p)).collect();
            adamw_step(&mut opt, config, model.store.tensors_mut(), &grads)?;
            loss_sum += loss_value * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_loss = evaluate_loss(&model, val_set).map_err(|e| match e {
            Error::Numeric(m) => Error::Numeric(format!("{m} at epoch {epoch}, lr {epoch_lr}")),
            other => other,
        })?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite validation loss at epoch {epoch}, lr {epoch_lr}"
            )));
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: epoch_lr,
        });
        debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} lr {epoch_lr}");
        if val_history.iter().all(|&v| val_loss < v) {
            best_model = model.clone();
        }
        val_history.push(val_loss);
        if sched.update(val_loss) {
            opt.lr = sched.lr;
            info!("epoch {epoch}: learning rate reduced to {}", opt.lr);
        }
        let (stop, best) = early_stopping(&val_history, config.early_stop_patience);
        if stop {
            info!("early stop at epoch {epoch}, best epoch {best}");
            stopped_early = true;
            break;
        }
    }
    let (_, best_epoch) = early_stopping(&val_history, config.early_stop_patience);
    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch,
        stopped_early,
    })
}

pub fn write_history(writer: impl Write, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_loss", "val_loss", "lr"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            format!("{}", r.train_loss),
            format!("{}", r.val_loss),
            format!("{}", r.lr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    write_history(std::fs::File::create(path)?, history)
}

/// Pearson correlation, population convention.
pub fn pearson(targets: &[f64], preds: &[f64]) -> Result<f64> {
    if targets.len() != preds.len() || targets.len() < 2 {
        return Err(Error::Data("pearson needs two equal-length series of length >= 2".into()));
    }
    let n = targets.len() as f64;
    let mt = targets.iter().sum::<f64>() / n;
    let mp = preds.iter().sum::<f64>() / n;
    let (mut cov, mut vt, mut vp) = (0.0, 0.0, 0.0);
    for (t, p) in targets.iter().zip(preds) {
        cov += (t - mt) * (p - mp);
        vt += (t - mt) * (t - mt);
        vp += (p - mp) * (p - mp);
    }
    if vt == 0.0 || vp == 0.0 {
        return Err(Error::Numeric("pearson undefined for zero variance".into()));
    }
    Ok((cov / (vt.sqrt() * vp.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson of average-tie ranks. A side with no rank
/// variance gives 0.
pub fn spearman(targets: &[f64], preds: &[f64]) -> Result<f64> {
    if targets.len() != preds.len() || targets.len() < 2 {
        return Err(Error::Data("spearman needs two equal-length series of length >= 2".into()));
    }
    let rt = average_ranks(targets);
    let rp = average_ranks(preds);
    let flat = |r: &[f64]| r.iter().all(|&x| x == r[0]);
    if flat(&rt) || flat(&rp) {
        warn!("spearman: constant ranks, returning 0");
        return Ok(0.0);
    }
    pearson(&rt, &rp)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pearson_rp: f64,
    pub spearman_rs: f64,
    pub mse: f64,
    pub n: usize,
}

pub fn metrics(targets: &[f64], preds: &[f64]) -> Result<MetricsReport> {
    let n = targets.len();
    let mse = targets.iter().zip(preds).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / n.max(1) as f64;
    Ok(MetricsReport {
        pearson_rp: pearson(targets, preds)?,
        spearman_rs: spearman(targets, preds)?,
        mse,
        n,
    })
}

/// Predictions of `model` against the targets in `examples`.
pub fn evaluate(model: &MolSetsModel, examples: &[(MixtureInput, f64)]) -> Result<MetricsReport> {
    let preds = examples
        .iter()
        .map(|(m, _)| model.predict(m))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = examples.iter().map(|(_, t)| *t).collect();
    metrics(&targets, &preds)
}
