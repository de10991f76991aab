//! Outer-level optimization of the modulating factor `a`.
//!
//! Each epoch of [`SearchRun`]:
//!
//! 1. draws `B` factors from `N(μ, σ²)` (clipped to `a ≤ 0`) and one shared
//!    shuffle order,
//! 2. trains `B` candidates for one epoch from the current model with the
//!    unified loss at each factor,
//! 3. scores every candidate on the validation set,
//! 4. standardizes the rewards and moves `μ` along the REINFORCE estimate
//!    `(1/B) Σ R̂_i (a_i − μ)/σ²`,
//! 5. keeps the best-scoring candidate as the next epoch's starting model.
//!
//! The run's result is the highest-scoring candidate seen in any epoch, taken
//! as-is. [`run_random_schedule`] and [`run_fixed`] share the setup and
//! per-epoch bookkeeping but train a single model.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::Validation;
use crate::margin::{modulating_factor, MarginSpec};
use crate::model::init_model;
use crate::numerics::{sample_gaussian, RngStream};
use crate::trainer::{train_candidates, train_epoch, LrSchedule, SgdConfig, TrainState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub embedding: usize,
    pub scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![128],
            embedding: 64,
            scale: 32.0,
        }
    }
}

impl ModelConfig {
    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.embedding))
            .collect()
    }
}

/// Everything about inner-level training that is shared by all run modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSetup {
    pub model: ModelConfig,
    pub sgd: SgdConfig,
    pub schedule: LrSchedule,
    pub epochs: usize,
}

impl Default for RunSetup {
    fn default() -> Self {
        RunSetup {
            model: ModelConfig::default(),
            sgd: SgdConfig::default(),
            schedule: LrSchedule::default(),
            epochs: 30,
        }
    }
}

impl RunSetup {
    pub fn initial_state(&self, train: &LabeledDataset, seed: u64) -> Result<TrainState> {
        let (model, head) = init_model(
            &self.model.layer_dims(train.dim()),
            train.classes,
            self.model.scale,
            &RngStream::new(seed, "init"),
        )?;
        Ok(TrainState::new(model, head))
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.schedule.rate_at(self.sgd.learning_rate, epoch)
    }
}

/// Stream for zero-based `epoch`; its `shuffle` child orders the epoch's data.
pub fn epoch_stream(seed: u64, epoch: usize) -> RngStream {
    RngStream::new(seed, format!("epoch{epoch}"))
}

/// Gaussian over the factor (or over `t` with `a = −eᵗ`, see [`FactorSpace`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchDistribution {
    pub mu: f64,
    pub sigma: f64,
    pub eta: f64,
    pub samples: usize,
}

impl Default for SearchDistribution {
    fn default() -> Self {
        SearchDistribution {
            mu: -10.0,
            sigma: 0.2,
            eta: 0.05,
            samples: 4,
        }
    }
}

impl SearchDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::config("search.sigma", "must be > 0"));
        }
        if !(self.eta > 0.0) {
            return Err(Error::config("search.eta", "must be > 0"));
        }
        if self.samples == 0 {
            return Err(Error::config("search.samples", "must be >= 1"));
        }
        if !self.mu.is_finite() {
            return Err(Error::config("search.mu0", "must be finite"));
        }
        Ok(())
    }
}

/// Which log-density gradient multiplies the rewards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreGrad {
    /// `∇_μ log g = (a − μ)/σ²`: gradient ascent on the expected reward.
    #[default]
    Mu,
    /// `∇_a log g = −(a − μ)/σ²`, the sign-flipped reading.
    A,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterOptimizer {
    /// `μ ← μ + η·ĝ`.
    #[default]
    Sgd,
    /// Adam ascent on `ĝ` with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    Adam,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorSpace {
    /// Sample `a` directly, clipped to `a ≤ 0`.
    #[default]
    Direct,
    /// Sample `t` and use `a = −eᵗ`; `μ` and `σ` live in `t`.
    NegExp,
}

impl FactorSpace {
    pub fn to_factor(self, draw: f64) -> f64 {
        match self {
            FactorSpace::Direct => draw.min(0.0),
            FactorSpace::NegExp => -draw.exp(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSettings {
    #[serde(flatten)]
    pub distribution: SearchDistribution,
    pub score_grad: ScoreGrad,
    pub optimizer: OuterOptimizer,
    pub space: FactorSpace,
}

/// Raw draws from the search distribution (before mapping to factors).
pub fn sample_draws(dist: &SearchDistribution, stream: &RngStream) -> Result<Vec<f64>> {
    sample_gaussian(stream, dist.mu, dist.sigma, dist.samples)
}

/// `B` factors `min(draw, 0)`, `draw ~ N(μ, σ²)`.
pub fn sample_factors(dist: &SearchDistribution, stream: &RngStream) -> Result<Vec<f64>> {
    Ok(sample_draws(dist, stream)?
        .into_iter()
        .map(|d| FactorSpace::Direct.to_factor(d))
        .collect())
}

/// Zero mean, unit population variance; all zeros when the spread is below `1e-12`.
pub fn normalize_rewards(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::contract("no rewards to normalize"));
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let std = (raw.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < 1e-12 {
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(raw.iter().map(|r| (r - mean) / std).collect())
}

/// REINFORCE estimate `(1/B) Σ R_i · score_i` of the gradient of the expected
/// reward with respect to `μ`.
pub fn score_gradient(
    mu: f64,
    sigma: f64,
    samples: &[f64],
    rewards: &[f64],
    mode: ScoreGrad,
) -> Result<f64> {
    if samples.len() != rewards.len() || samples.is_empty() {
        return Err(Error::contract(format!(
            "{} samples for {} rewards",
            samples.len(),
            rewards.len()
        )));
    }
    let var = sigma * sigma;
    let sign = match mode {
        ScoreGrad::Mu => 1.0,
        ScoreGrad::A => -1.0,
    };
    let sum: f64 = samples
        .iter()
        .zip(rewards)
        .map(|(x, r)| r * sign * (x - mu) / var)
        .sum();
    Ok(sum / samples.len() as f64)
}

/// `μ' = μ + η · (1/B) Σ_i R_i (a_i − μ)/σ²`.
pub fn reinforce_update(dist: &SearchDistribution, factors: &[f64], normalized_rewards: &[f64]) -> Result<f64> {
    let g = score_gradient(dist.mu, dist.sigma, factors, normalized_rewards, ScoreGrad::Mu)?;
    Ok(dist.mu + dist.eta * g)
}

/// Scalar Adam used for ascent on `μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: f64,
    v: f64,
    t: i32,
}

impl AdamState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new() -> Self {
        AdamState { m: 0.0, v: 0.0, t: 0 }
    }

    /// Step to add to the parameter for ascent along `grad`.
    pub fn step(&mut self, grad: f64, lr: f64) -> f64 {
        self.t += 1;
        self.m = Self::BETA1 * self.m + (1.0 - Self::BETA1) * grad;
        self.v = Self::BETA2 * self.v + (1.0 - Self::BETA2) * grad * grad;
        let m_hat = self.m / (1.0 - Self::BETA1.powi(self.t));
        let v_hat = self.v / (1.0 - Self::BETA2.powi(self.t));
        lr * m_hat / (v_hat.sqrt() + Self::EPS)
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}

/// Index of the highest reward; ties go to the lowest index.
pub fn select_best(rewards: &[f64]) -> Result<usize> {
    if rewards.is_empty() {
        return Err(Error::contract("no candidates to select from"));
    }
    let mut best = 0;
    for (i, r) in rewards.iter().enumerate().skip(1) {
        if *r > rewards[best] {
            best = i;
        }
    }
    Ok(best)
}

/// One sampled factor and how its candidate did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub index: usize,
    pub draw: f64,
    pub factor: f64,
    pub mean_loss: f64,
    pub raw_reward: f64,
    pub normalized_reward: f64,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchEpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mu_before: f64,
    pub mu_after: f64,
    pub optimizer: OuterOptimizer,
    pub candidates: Vec<CandidateRecord>,
    pub winner: usize,
    /// Digest of the parameters every candidate started from.
    pub start_digest: String,
}

impl SearchEpochRecord {
    pub fn factors(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.factor).collect()
    }

    pub fn raw_rewards(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.raw_reward).collect()
    }

    pub fn winner_reward(&self) -> f64 {
        self.candidates[self.winner].raw_reward
    }
}

/// Final model of a run with where it came from.
#[derive(Clone, Debug)]
pub struct RunOutcome<R> {
    /// Highest-scoring model (search) or the last model (fixed and random).
    pub model: TrainState,
    pub reward: f64,
    pub history: Vec<R>,
}

/// Step-by-step reward-guided search.
pub struct SearchRun<'a> {
    settings: SearchSettings,
    setup: RunSetup,
    train: &'a LabeledDataset,
    validation: &'a Validation,
    seed: u64,
    state: TrainState,
    mu: f64,
    adam: AdamState,
    best: Option<(f64, TrainState)>,
    last_candidates: Vec<TrainState>,
    history: Vec<SearchEpochRecord>,
}

impl<'a> SearchRun<'a> {
    pub fn new(
        settings: &SearchSettings,
        setup: &RunSetup,
        train: &'a LabeledDataset,
        validation: &'a Validation,
        seed: u64,
    ) -> Result<Self> {
        settings.distribution.validate()?;
        setup.sgd.validate()?;
        setup.schedule.validate()?;
        let state = setup.initial_state(train, seed)?;
        Ok(SearchRun {
            mu: settings.distribution.mu,
            settings: settings.clone(),
            setup: setup.clone(),
            train,
            validation,
            seed,
            state,
            adam: AdamState::new(),
            best: None,
            last_candidates: Vec::new(),
            history: Vec::new(),
        })
    }

    pub fn epoch(&self) -> usize {
        self.history.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Model the next epoch's candidates start from.
    pub fn current(&self) -> &TrainState {
        &self.state
    }

    /// Candidates trained in the most recent epoch, in sampling order.
    pub fn last_candidates(&self) -> &[TrainState] {
        &self.last_candidates
    }

    pub fn history(&self) -> &[SearchEpochRecord] {
        &self.history
    }

    pub fn step(&mut self) -> Result<&SearchEpochRecord> {
        let epoch = self.history.len();
        let lr = self.setup.learning_rate(epoch);
        let stream = epoch_stream(self.seed, epoch);
        let dist = SearchDistribution {
            mu: self.mu,
            ..self.settings.distribution.clone()
        };
        let draws = sample_draws(&dist, &stream.child("factors"))?;
        let factors: Vec<f64> = draws.iter().map(|&d| self.settings.space.to_factor(d)).collect();

        let trained = train_candidates(&self.state, &factors, self.train, &self.setup.sgd, lr, &stream)?;
        let validation = self.validation;
        let raw: Vec<f64> = trained
            .par_iter()
            .map(|(s, _)| validation.score(&s.model, &s.head))
            .collect::<Result<_>>()?;
        let normalized = normalize_rewards(&raw)?;
        let grad = score_gradient(dist.mu, dist.sigma, &draws, &normalized, self.settings.score_grad)?;
        let mu_after = match self.settings.optimizer {
            OuterOptimizer::Sgd => dist.mu + dist.eta * grad,
            OuterOptimizer::Adam => dist.mu + self.adam.step(grad, dist.eta),
        };
        let winner = select_best(&raw)?;

        let candidates = trained
            .iter()
            .enumerate()
            .map(|(i, (s, loss))| CandidateRecord {
                index: i,
                draw: draws[i],
                factor: factors[i],
                mean_loss: *loss,
                raw_reward: raw[i],
                normalized_reward: normalized[i],
                digest: s.digest(),
            })
            .collect();
        let record = SearchEpochRecord {
            epoch,
            learning_rate: lr,
            mu_before: dist.mu,
            mu_after,
            optimizer: self.settings.optimizer,
            candidates,
            winner,
            start_digest: self.state.digest(),
        };

        let states: Vec<TrainState> = trained.into_iter().map(|(s, _)| s).collect();
        if self.best.as_ref().is_none_or(|(r, _)| raw[winner] > *r) {
            self.best = Some((raw[winner], states[winner].clone()));
        }
        self.state = states[winner].clone();
        self.last_candidates = states;
        self.mu = mu_after;
        self.history.push(record);
        Ok(self.history.last().expect("just pushed"))
    }

    /// Best model seen so far (the initial model before any epoch).
    pub fn finish(self) -> Result<RunOutcome<SearchEpochRecord>> {
        let (reward, model) = match self.best {
            Some(best) => best,
            None => {
                let r = self.validation.score(&self.state.model, &self.state.head)?;
                (r, self.state)
            }
        };
        Ok(RunOutcome {
            model,
            reward,
            history: self.history,
        })
    }
}

/// Runs `setup.epochs` epochs of reward-guided search.
pub fn run_search(
    settings: &SearchSettings,
    setup: &RunSetup,
    train: &LabeledDataset,
    validation: &Validation,
    seed: u64,
) -> Result<RunOutcome<SearchEpochRecord>> {
    let mut run = SearchRun::new(settings, setup, train, validation, seed)?;
    for _ in 0..setup.epochs {
        run.step()?;
    }
    run.finish()
}

/// Per-epoch factor for a single-model run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FactorSchedule {
    Fixed(MarginSpec),
    /// Fresh `a` each epoch: `|a|` log-uniform on `[1, |a_min|]` when
    /// `a_min ≤ −1`, uniform on `[a_min, 0]` when `−1 < a_min < 0`, and
    /// always `0` when `a_min = 0`.
    Random { a_min: f64 },
}

impl FactorSchedule {
    fn validate(&self) -> Result<()> {
        match self {
            FactorSchedule::Fixed(spec) => spec.validate(),
            FactorSchedule::Random { a_min } if !(*a_min <= 0.0 && a_min.is_finite()) => {
                Err(Error::config("random.a_min", "must be finite and <= 0"))
            }
            FactorSchedule::Random { .. } => Ok(()),
        }
    }

    fn spec_for(&self, stream: &RngStream) -> MarginSpec {
        match *self {
            FactorSchedule::Fixed(spec) => spec,
            FactorSchedule::Random { a_min } => MarginSpec::Unified {
                a: sample_random_factor(a_min, stream),
            },
        }
    }
}

pub fn sample_random_factor(a_min: f64, stream: &RngStream) -> f64 {
    if a_min == 0.0 {
        return 0.0;
    }
    let u: f64 = stream.rng().random();
    if a_min <= -1.0 {
        -(u * (-a_min).ln()).exp()
    } else {
        a_min * u
    }
}

/// The factor a fixed spec applies to every row, when that is a constant.
pub fn constant_factor(spec: MarginSpec, scale: f64) -> Option<f64> {
    match spec {
        MarginSpec::Plain | MarginSpec::Additive { .. } | MarginSpec::Unified { .. } => {
            modulating_factor(spec, 0.0, scale).ok()
        }
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Modulating factor in force for the epoch, when it is row-independent.
    pub a: Option<f64>,
    pub mean_loss: f64,
    pub reward: f64,
}

/// A single model trained under a [`FactorSchedule`].
pub struct ScheduleRun<'a> {
    schedule: FactorSchedule,
    setup: RunSetup,
    train: &'a LabeledDataset,
    validation: &'a Validation,
    seed: u64,
    state: TrainState,
    history: Vec<EpochRecord>,
}

impl<'a> ScheduleRun<'a> {
    pub fn new(
        schedule: FactorSchedule,
        setup: &RunSetup,
        train: &'a LabeledDataset,
        validation: &'a Validation,
        seed: u64,
    ) -> Result<Self> {
        schedule.validate()?;
        setup.sgd.validate()?;
        setup.schedule.validate()?;
        Ok(ScheduleRun {
            schedule,
            setup: setup.clone(),
            train,
            validation,
            seed,
            state: setup.initial_state(train, seed)?,
            history: Vec::new(),
        })
    }

    pub fn current(&self) -> &TrainState {
        &self.state
    }

    pub fn step(&mut self) -> Result<&EpochRecord> {
        let epoch = self.history.len();
        let lr = self.setup.learning_rate(epoch);
        let stream = epoch_stream(self.seed, epoch);
        let spec = self.schedule.spec_for(&stream.child("factor"));
        let (next, mean_loss) = train_epoch(&self.state, spec, self.train, &self.setup.sgd, lr, &stream)?;
        let reward = self.validation.score(&next.model, &next.head)?;
        self.state = next;
        self.history.push(EpochRecord {
            epoch,
            learning_rate: lr,
            a: constant_factor(spec, self.setup.model.scale),
            mean_loss,
            reward,
        });
        Ok(self.history.last().expect("just pushed"))
    }

    pub fn finish(self) -> Result<RunOutcome<EpochRecord>> {
        let reward = match self.history.last() {
            Some(r) => r.reward,
            None => self.validation.score(&self.state.model, &self.state.head)?,
        };
        Ok(RunOutcome {
            model: self.state,
            reward,
            history: self.history,
        })
    }
}

/// Trains with a fixed loss for `setup.epochs` epochs.
pub fn run_fixed(
    spec: MarginSpec,
    setup: &RunSetup,
    train: &LabeledDataset,
    validation: &Validation,
    seed: u64,
) -> Result<RunOutcome<EpochRecord>> {
    run_schedule(FactorSchedule::Fixed(spec), setup, train, validation, seed)
}

/// Random-Softmax: a fresh factor every epoch, no reward guidance.
pub fn run_random_schedule(
    a_min: f64,
    setup: &RunSetup,
    train: &LabeledDataset,
    validation: &Validation,
    seed: u64,
) -> Result<RunOutcome<EpochRecord>> {
    run_schedule(FactorSchedule::Random { a_min }, setup, train, validation, seed)
}

fn run_schedule(
    schedule: FactorSchedule,
    setup: &RunSetup,
    train: &LabeledDataset,
    validation: &Validation,
    seed: u64,
) -> Result<RunOutcome<EpochRecord>> {
    let mut run = ScheduleRun::new(schedule, setup, train, validation, seed)?;
    for _ in 0..setup.epochs {
        run.step()?;
    }
    run.finish()
}
