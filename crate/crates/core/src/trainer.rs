//! Inner-level optimization: SGD with momentum and L2 weight decay, one epoch
//! at a time, and a population of candidates that differ only in the loss.

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::margin::{loss_and_gradient, margin_exceeds_cosine, LogitRow, MarginSpec};
use crate::model::{
    backward, forward, parameter_digest, parameter_slices, parameter_slices_mut, ClassifierHead,
    EmbeddingModel, ParamGrads,
};
use crate::numerics::{DenseMatrix, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            batch_size: 128,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("sgd.learning_rate", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("sgd.momentum", "must be in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("sgd.weight_decay", "must be >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("sgd.batch_size", "must be > 0"));
        }
        Ok(())
    }
}

/// Step schedule: the rate is divided by `drop_factor` at each listed epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub drop_epochs: Vec<usize>,
    pub drop_factor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            drop_epochs: vec![15, 25],
            drop_factor: 10.0,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.drop_factor > 1.0) {
            return Err(Error::config("schedule.drop_factor", "must be > 1"));
        }
        if self.drop_epochs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("schedule.drop_epochs", "must be sorted"));
        }
        Ok(())
    }

    /// Learning rate for zero-based `epoch`.
    pub fn rate_at(&self, initial: f64, epoch: usize) -> f64 {
        let drops = self.drop_epochs.iter().filter(|&&d| d <= epoch).count();
        initial / self.drop_factor.powi(drops as i32)
    }
}

/// Model, head, momentum buffers and the number of completed epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: EmbeddingModel,
    pub head: ClassifierHead,
    pub velocity: ParamGrads,
    pub epoch: usize,
}

impl TrainState {
    pub fn new(model: EmbeddingModel, head: ClassifierHead) -> Self {
        let velocity = ParamGrads::zeros_like(&model, &head);
        TrainState {
            model,
            head,
            velocity,
            epoch: 0,
        }
    }

    pub fn digest(&self) -> String {
        parameter_digest(&self.model, &self.head)
    }
}

/// `v ← μ·v + (g + λ·w)`, `w ← w − lr·v`, for every parameter.
pub fn sgd_step(state: &mut TrainState, grads: &ParamGrads, config: &SgdConfig, lr: f64) -> Result<()> {
    let grad_slices = grads.slices();
    let vel_slices = state.velocity.slices_mut();
    let params = parameter_slices_mut(&mut state.model, &mut state.head);
    if grad_slices.len() != params.len() || vel_slices.len() != params.len() {
        return Err(Error::contract("gradient and parameter layouts differ"));
    }
    for ((w, g), v) in params.into_iter().zip(grad_slices).zip(vel_slices) {
        if w.len() != g.len() || w.len() != v.len() {
            return Err(Error::contract(format!(
                "shape mismatch: {} params, {} grads, {} velocity",
                w.len(),
                g.len(),
                v.len()
            )));
        }
        for ((wi, gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = config.momentum * *vi + (gi + config.weight_decay * *wi);
            *wi -= lr * *vi;
        }
    }
    Ok(())
}

/// Mean loss of a batch and `∂(mean loss)/∂cos`. Also counts rows where an
/// angular margin lifts the target logit.
pub fn batch_loss_gradient(
    spec: MarginSpec,
    cosines: &DenseMatrix,
    labels: &[usize],
    scale: f64,
) -> Result<(f64, DenseMatrix, usize)> {
    let n = cosines.rows();
    let mut grad = DenseMatrix::zeros(n, cosines.cols());
    let mut total = 0.0;
    let mut lifted = 0;
    for (i, &y) in labels.iter().enumerate() {
        let row = LogitRow::new(cosines.row(i), y, scale)?;
        if margin_exceeds_cosine(spec, row.target_cosine()) {
            lifted += 1;
        }
        total += loss_and_gradient(spec, &row, grad.row_mut(i))?;
    }
    let inv = 1.0 / n as f64;
    grad.as_mut_slice().iter_mut().for_each(|g| *g *= inv);
    Ok((total * inv, grad, lifted))
}

/// Sample order for one epoch, drawn from `stream/shuffle`.
pub fn epoch_order(len: usize, stream: &RngStream) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut stream.child("shuffle").rng());
    order
}

fn train_with_order(
    state: &TrainState,
    spec: MarginSpec,
    data: &LabeledDataset,
    order: &[usize],
    config: &SgdConfig,
    lr: f64,
) -> Result<(TrainState, f64)> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    if data.classes > state.head.classes() {
        return Err(Error::contract(format!(
            "dataset has {} classes, head has {}",
            data.classes,
            state.head.classes()
        )));
    }
    let mut next = state.clone();
    let mut loss_sum = 0.0;
    let mut lifted = 0;
    for chunk in order.chunks(config.batch_size) {
        let batch = data.features.select_rows(chunk);
        let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
        let (cosines, cache) = forward(&next.model, &next.head, &batch)?;
        let (mean, grad_cos, l) = batch_loss_gradient(spec, &cosines, &labels, next.head.scale)?;
        loss_sum += mean * chunk.len() as f64;
        lifted += l;
        let grads = backward(&next.model, &cache, &grad_cos)?;
        sgd_step(&mut next, &grads, config, lr)?;
    }
    if lifted > 0 {
        warn!(
            "{} of {} samples had θ past π/m1 under {:?}; the margin raised their target logit",
            lifted,
            order.len(),
            spec
        );
    }
    if parameter_slices(&next.model, &next.head)
        .iter()
        .any(|s| s.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::contract("training diverged: non-finite parameters"));
    }
    next.epoch += 1;
    Ok((next, loss_sum / order.len() as f64))
}

/// One shuffled pass over `data` in mini-batches. Returns the new state and
/// the running mean of per-sample losses.
pub fn train_epoch(
    state: &TrainState,
    spec: MarginSpec,
    data: &LabeledDataset,
    config: &SgdConfig,
    lr: f64,
    stream: &RngStream,
) -> Result<(TrainState, f64)> {
    let order = epoch_order(data.len(), stream);
    train_with_order(state, spec, data, &order, config, lr)
}

/// Trains one candidate per factor from the same starting state and the same
/// shuffle order (drawn from `epoch_stream/shuffle`). Candidates run in
/// parallel on the current rayon pool; results keep the input order.
pub fn train_candidates(
    state: &TrainState,
    factors: &[f64],
    data: &LabeledDataset,
    config: &SgdConfig,
    lr: f64,
    epoch_stream: &RngStream,
) -> Result<Vec<(TrainState, f64)>> {
    if let Some(a) = factors.iter().find(|a| !(**a <= 0.0)) {
        return Err(Error::contract(format!("candidate factor {a} is not <= 0")));
    }
    let order = epoch_order(data.len(), epoch_stream);
    factors
        .par_iter()
        .map(|&a| train_with_order(state, MarginSpec::Unified { a }, data, &order, config, lr))
        .collect()
}
