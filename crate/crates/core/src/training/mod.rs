//! RC-IRL and the pooled cross-entropy baseline.
//!
//! Both trainers share the model family, the optimizer and the update
//! schedule. They differ only in the objective: RC-IRL compares each sample
//! against the expert of its own frame, the baseline classifies every block
//! of every frame in one pool.

mod ingest;
mod optim;

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{rank_frames, RankStats};
use crate::sampler::Split;
use crate::valuenet::{FeatureBlock, ModelDims, ModelError, ValueModel};
use crate::{par, seed};

pub use ingest::{frames_from_records, ingest_frames, Dataset, IngestReport};
pub use optim::OptimizerKind;
use optim::{clip_norm, Optimizer};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("io error: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Contract(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("no training frames")]
    EmptyDataset,
    #[error("non-finite loss or features in frame `{frame}`")]
    NonFinite { frame: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One scenario's expert block and its query of sampled blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub scenario_id: String,
    pub split: Split,
    pub n_obstacles: usize,
    pub expert: FeatureBlock,
    pub samples: Vec<FeatureBlock>,
}

impl Frame {
    /// A copy with `value` appended as an extra channel on every row.
    pub fn with_constant_channel(&self, value: f64) -> Self {
        Self {
            expert: self.expert.with_constant_channel(value),
            samples: self.samples.iter().map(|b| b.with_constant_channel(value)).collect(),
            ..self.clone()
        }
    }

    fn check(&self, model: &ValueModel) -> Result<(), ModelError> {
        model.check_block(&self.expert)?;
        self.samples.iter().try_for_each(|b| model.check_block(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Frames per minibatch.
    pub batch_size: usize,
    pub weight_decay: f64,
    pub clip_norm: f64,
    /// Leak `a` of the pairwise loss.
    pub leak: f64,
    pub n_hidden: usize,
    /// Weight expert blocks so both classes carry equal total weight in the
    /// baseline's cross entropy.
    pub balance_classes: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 0.003,
            optimizer: OptimizerKind::Adam,
            batch_size: 8,
            weight_decay: 1e-4,
            clip_norm: 10.0,
            leak: 0.05,
            n_hidden: crate::NUM_HIDDEN,
            balance_classes: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.leak > 0.0 && self.leak < 1.0) {
            return bad("leak must lie in (0, 1)");
        }
        if self.batch_size == 0 || self.n_hidden == 0 {
            return bad("batch_size and n_hidden must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.clip_norm > 0.0) {
            return bad("weight_decay must be >= 0 and clip_norm > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rcirl,
    Gan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub expert_top_decile_rate: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub method: Method,
    pub n_train: usize,
    /// Frames behind the per-epoch rank statistics (holdout when present).
    pub n_monitor: usize,
    pub epochs: Vec<EpochStats>,
    pub final_rank: Option<RankStats>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,expert_top_decile_rate,wall_time_s\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{:.3}\n",
                e.epoch, e.mean_loss, e.expert_top_decile_rate, e.wall_time_s
            ));
        }
        out
    }
}

/// `L(y) = y` for `y >= 0`, `a · y` otherwise.
pub fn leaky(y: f64, a: f64) -> f64 {
    if y >= 0.0 {
        y
    } else {
        a * y
    }
}

fn leaky_slope(y: f64, a: f64) -> f64 {
    if y >= 0.0 {
        1.0
    } else {
        a
    }
}

/// `(1/N) Σ_i L(V(sample_i) - V(expert))`; lower is better.
pub fn pairwise_loss(model: &ValueModel, frame: &Frame, leak: f64) -> Result<f64, ModelError> {
    frame.check(model)?;
    Ok(pairwise_unchecked(model, frame, leak))
}

fn pairwise_unchecked(model: &ValueModel, frame: &Frame, leak: f64) -> f64 {
    let total: f64 = frame
        .samples
        .iter()
        .map(|s| leaky(model.value_difference_unchecked(s, &frame.expert), leak))
        .sum();
    total / frame.samples.len() as f64
}

/// Frame loss and its gradient.
fn pairwise_gradient(model: &ValueModel, frame: &Frame, leak: f64) -> (f64, Vec<f64>) {
    let n = frame.samples.len() as f64;
    let mut grad = vec![0.0; model.param_count()];
    let mut loss = 0.0;
    for sample in &frame.samples {
        let d = model.value_difference_unchecked(sample, &frame.expert);
        loss += leaky(d, leak);
        let w = leaky_slope(d, leak) / n;
        model.accumulate_difference_gradient(sample, &frame.expert, w, &mut grad);
    }
    (loss / n, grad)
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross entropy of `σ(V(block))` against `label` (1 = expert).
pub fn block_cross_entropy(value: f64, label: bool) -> f64 {
    if label {
        softplus(-value)
    } else {
        softplus(value)
    }
}

/// Mean cross entropy over every block of every frame, pooled.
pub fn gan_loss(model: &ValueModel, frames: &[Frame]) -> Result<f64, ModelError> {
    let blocks = pooled_blocks(frames, false);
    let mut total = 0.0;
    let mut weight = 0.0;
    for b in &blocks {
        let block = b.block(frames);
        model.check_block(block)?;
        total += b.weight * block_cross_entropy(model.value_unchecked(block), b.label);
        weight += b.weight;
    }
    Ok(total / weight)
}

#[derive(Debug, Clone, Copy)]
struct PooledBlock {
    frame: usize,
    /// `None` for the expert.
    sample: Option<usize>,
    label: bool,
    weight: f64,
}

impl PooledBlock {
    fn block<'a>(&self, frames: &'a [Frame]) -> &'a FeatureBlock {
        let f = &frames[self.frame];
        match self.sample {
            None => &f.expert,
            Some(i) => &f.samples[i],
        }
    }
}

fn pooled_blocks(frames: &[Frame], balance: bool) -> Vec<PooledBlock> {
    let n_pos = frames.len() as f64;
    let n_neg: f64 = frames.iter().map(|f| f.samples.len() as f64).sum();
    let pos_weight = if balance && n_pos > 0.0 { n_neg / n_pos } else { 1.0 };
    let mut out = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        out.push(PooledBlock { frame: i, sample: None, label: true, weight: pos_weight });
        for j in 0..f.samples.len() {
            out.push(PooledBlock { frame: i, sample: Some(j), label: false, weight: 1.0 });
        }
    }
    out
}

struct Trainer<'a> {
    config: &'a TrainConfig,
    model: ValueModel,
    optimizer: Optimizer,
}

impl Trainer<'_> {
    /// Applies one update from summed per-item gradients.
    fn apply(&mut self, mut grad: Vec<f64>, scale: f64) {
        let mut params = self.model.params();
        for (g, p) in grad.iter_mut().zip(&params) {
            *g = *g * scale + self.config.weight_decay * p;
        }
        clip_norm(&mut grad, self.config.clip_norm);
        self.optimizer.step(&mut params, &grad);
        self.model.set_params(&params);
    }
}

fn initial_model(dataset: &Dataset, train: &[Frame], config: &TrainConfig) -> ValueModel {
    let dims = ModelDims {
        n_features: train[0].expert.n_features(),
        n_hidden: config.n_hidden,
        n_times: dataset.time_grid.len(),
    };
    let mut norm_table = dataset.norm_table.clone();
    // extra channels beyond the table pass through unscaled
    norm_table.center.resize(dims.n_features, 0.0);
    norm_table.scale.resize(dims.n_features, 1.0);
    ValueModel::init(dims, config.seed, dataset.time_grid.clone(), norm_table)
}

fn prepare(dataset: &Dataset, config: &TrainConfig) -> Result<(Vec<Frame>, Vec<Frame>), TrainError> {
    config.validate()?;
    let train = dataset.split(Split::Train);
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let holdout = dataset.split(Split::Holdout);
    let monitor = if holdout.is_empty() { train.clone() } else { holdout };
    Ok((train, monitor))
}

fn epoch_stats(
    model: &ValueModel,
    monitor: &[Frame],
    epoch: usize,
    mean_loss: f64,
    start: Instant,
) -> EpochStats {
    let rate = rank_frames(model, monitor).map(|r| r.top_decile_rate).unwrap_or(0.0);
    EpochStats {
        epoch,
        mean_loss,
        expert_top_decile_rate: rate,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Minibatch descent on the mean pairwise loss over `Train` frames.
pub fn train_rcirl(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(ValueModel, TrainReport), TrainError> {
    let (train, monitor) = prepare(dataset, config)?;
    let model = initial_model(dataset, &train, config);
    for f in train.iter().chain(&monitor) {
        f.check(&model)?;
    }
    let start = Instant::now();
    let mut trainer = Trainer {
        config,
        optimizer: Optimizer::new(config.optimizer, config.learning_rate, model.param_count()),
        model,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut seed::stream(config.seed, &format!("shuffle/{epoch}")));
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let model = &trainer.model;
            let results = par::map(batch, |&i| pairwise_gradient(model, &train[i], config.leak));
            let mut grad = vec![0.0; model.param_count()];
            for (&i, (loss, g)) in batch.iter().zip(&results) {
                if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
                    return Err(TrainError::NonFinite { frame: train[i].scenario_id.clone() });
                }
                loss_sum += loss;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            trainer.apply(grad, 1.0 / batch.len() as f64);
        }
        let stats =
            epoch_stats(&trainer.model, &monitor, epoch, loss_sum / train.len() as f64, start);
        log::info!(
            "rcirl epoch {epoch}: loss {:.6}, top-decile {:.3}",
            stats.mean_loss,
            stats.expert_top_decile_rate
        );
        epochs.push(stats);
    }
    finish(trainer.model, Method::Rcirl, train.len(), &monitor, epochs)
}

/// Minibatch descent on pooled cross entropy, expert blocks labeled 1 and
/// samples 0, ignoring which frame a block came from.
pub fn train_gan_baseline(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(ValueModel, TrainReport), TrainError> {
    let (train, monitor) = prepare(dataset, config)?;
    let model = initial_model(dataset, &train, config);
    for f in train.iter().chain(&monitor) {
        f.check(&model)?;
    }
    let start = Instant::now();
    let mut trainer = Trainer {
        config,
        optimizer: Optimizer::new(config.optimizer, config.learning_rate, model.param_count()),
        model,
    };
    let mut pool = pooled_blocks(&train, config.balance_classes);
    let total_weight: f64 = pool.iter().map(|b| b.weight).sum();
    // same number of updates per epoch as the pairwise trainer
    let n_batches = train.len().div_ceil(config.batch_size);
    let batch_blocks = pool.len().div_ceil(n_batches);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        pool.shuffle(&mut seed::stream(config.seed, &format!("shuffle/{epoch}")));
        let mut loss_sum = 0.0;
        for batch in pool.chunks(batch_blocks) {
            let model = &trainer.model;
            let results = par::map(batch, |b| {
                let block = b.block(&train);
                let mut grad = vec![0.0; model.param_count()];
                let v = model.value_unchecked(block);
                let target = if b.label { 1.0 } else { 0.0 };
                model.accumulate_gradient(block, b.weight * (sigmoid(v) - target), &mut grad);
                (b.weight * block_cross_entropy(v, b.label), grad)
            });
            let mut grad = vec![0.0; model.param_count()];
            let mut batch_weight = 0.0;
            for (b, (loss, g)) in batch.iter().zip(&results) {
                if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
                    return Err(TrainError::NonFinite {
                        frame: train[b.frame].scenario_id.clone(),
                    });
                }
                loss_sum += loss;
                batch_weight += b.weight;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            trainer.apply(grad, 1.0 / batch_weight);
        }
        let stats = epoch_stats(&trainer.model, &monitor, epoch, loss_sum / total_weight, start);
        log::info!(
            "gan epoch {epoch}: loss {:.6}, top-decile {:.3}",
            stats.mean_loss,
            stats.expert_top_decile_rate
        );
        epochs.push(stats);
    }
    finish(trainer.model, Method::Gan, train.len(), &monitor, epochs)
}

fn finish(
    model: ValueModel,
    method: Method,
    n_train: usize,
    monitor: &[Frame],
    epochs: Vec<EpochStats>,
) -> Result<(ValueModel, TrainReport), TrainError> {
    model.validate()?;
    let final_rank = rank_frames(&model, monitor);
    Ok((model, TrainReport { method, n_train, n_monitor: monitor.len(), epochs, final_rank }))
}
