//! Experiment configuration: a TOML file, command-line overrides on top, and
//! validation that reports the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::SyntheticSpec;
use crate::error::{Error, Result};
use crate::eval::RewardKind;
use crate::margin::MarginSpec;
use crate::search::{
    FactorSpace, ModelConfig, OuterOptimizer, RunSetup, ScoreGrad, SearchDistribution, SearchSettings,
};
use crate::trainer::{LrSchedule, SgdConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds initialization, shuffling and factor sampling.
    pub seed: u64,
    pub epochs: usize,
    /// Run directory; `runs/<mode>-<seed>` when unset.
    pub out: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub sgd: SgdConfig,
    pub schedule: LrSchedule,
    pub search: SearchConfig,
    pub random: RandomConfig,
    pub ablation: AblationConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            epochs: 30,
            out: None,
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            sgd: SgdConfig::default(),
            schedule: LrSchedule::default(),
            search: SearchConfig::default(),
            random: RandomConfig::default(),
            ablation: AblationConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    #[default]
    Synthetic,
    Csv,
}

/// Where the data comes from and how identities are split. The data seed is
/// separate from the run seed so that runs with different seeds see the same
/// split and validation pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub path: Option<PathBuf>,
    pub seed: u64,
    pub classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub noise_sigma: f64,
    /// Fraction of identities used for training; the rest validate.
    pub train_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        DatasetConfig {
            kind: DatasetKind::Synthetic,
            path: None,
            seed: s.seed,
            classes: s.classes,
            dim: s.dim,
            samples_per_class: s.samples_per_class,
            noise_sigma: s.noise_sigma,
            train_fraction: 0.8,
        }
    }
}

impl DatasetConfig {
    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            classes: self.classes,
            dim: self.dim,
            samples_per_class: self.samples_per_class,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    Plain,
    #[serde(alias = "angular")]
    Sphere,
    #[serde(alias = "additive-angular")]
    Arc,
    #[serde(alias = "additive")]
    Am,
    Combined,
    Unified,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "plain" | "softmax" => LossKind::Plain,
            "sphere" | "angular" => LossKind::Sphere,
            "arc" | "additive-angular" => LossKind::Arc,
            "am" | "additive" => LossKind::Am,
            "combined" => LossKind::Combined,
            "unified" => LossKind::Unified,
            other => {
                return Err(Error::config(
                    "loss.kind",
                    format!("unknown loss {other:?}, expected plain|sphere|arc|am|combined|unified"),
                ))
            }
        })
    }
}

/// Fixed loss for `train-fixed`. Unset margins take the usual values:
/// `m1 = 2`, `m2 = 0.5` (arc) or `0.3` (combined), `m3 = 0.35` (am) or
/// `0.2` (combined).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub kind: LossKind,
    pub m1: Option<u32>,
    pub m2: Option<f64>,
    pub m3: Option<f64>,
    pub a: Option<f64>,
}

impl LossConfig {
    pub fn spec(&self) -> Result<MarginSpec> {
        let m1 = self.m1.unwrap_or(2);
        let spec = match self.kind {
            LossKind::Plain => MarginSpec::Plain,
            LossKind::Sphere => MarginSpec::Angular { m1 },
            LossKind::Arc => MarginSpec::AdditiveAngular {
                m2: self.m2.unwrap_or(0.5),
            },
            LossKind::Am => MarginSpec::Additive {
                m3: self.m3.unwrap_or(0.35),
            },
            LossKind::Combined => MarginSpec::Combined {
                m1: self.m1.unwrap_or(1),
                m2: self.m2.unwrap_or(0.3),
                m3: self.m3.unwrap_or(0.2),
            },
            LossKind::Unified => MarginSpec::Unified {
                a: self.a.unwrap_or(0.0),
            },
        };
        if let Err(e) = spec.validate() {
            let field = match self.kind {
                LossKind::Unified => "loss.a",
                LossKind::Sphere => "loss.m1",
                LossKind::Arc => "loss.m2",
                LossKind::Am => "loss.m3",
                _ => "loss",
            };
            return Err(Error::config(field, e.to_string()));
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub mu0: f64,
    pub sigma: f64,
    pub eta: f64,
    pub samples: usize,
    pub score_grad: ScoreGrad,
    pub optimizer: OuterOptimizer,
    pub space: FactorSpace,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let d = SearchDistribution::default();
        SearchConfig {
            mu0: d.mu,
            sigma: d.sigma,
            eta: d.eta,
            samples: d.samples,
            score_grad: ScoreGrad::default(),
            optimizer: OuterOptimizer::default(),
            space: FactorSpace::default(),
        }
    }
}

impl SearchConfig {
    pub fn settings(&self) -> SearchSettings {
        SearchSettings {
            distribution: SearchDistribution {
                mu: self.mu0,
                sigma: self.sigma,
                eta: self.eta,
                samples: self.samples,
            },
            score_grad: self.score_grad,
            optimizer: self.optimizer,
            space: self.space,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomConfig {
    pub a_min: f64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig { a_min: -1e4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub factors: Vec<f64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            factors: vec![0.0, -1.0, -10.0, -100.0, -1000.0, -10000.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Validation pairs drawn from the held-out identities.
    pub pairs: usize,
    pub folds: usize,
    pub reward: RewardKind,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            pairs: 2000,
            folds: 10,
            reward: RewardKind::Verification,
        }
    }
}

/// Command-line values that replace config entries when given.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub dataset: Option<PathBuf>,
    pub loss: Option<LossKind>,
    pub m1: Option<u32>,
    pub m2: Option<f64>,
    pub m3: Option<f64>,
    pub a: Option<f64>,
    pub samples: Option<usize>,
    pub mu0: Option<f64>,
    pub a_min: Option<f64>,
    pub factors: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_toml(&text)
    }

    /// The fully resolved config as written into every run directory.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = Some(v.clone());
        }
        if let Some(v) = o.epochs {
            self.epochs = v;
        }
        if let Some(v) = &o.dataset {
            self.dataset.kind = DatasetKind::Csv;
            self.dataset.path = Some(v.clone());
        }
        if let Some(v) = o.loss {
            self.loss.kind = v;
        }
        if o.m1.is_some() {
            self.loss.m1 = o.m1;
        }
        if o.m2.is_some() {
            self.loss.m2 = o.m2;
        }
        if o.m3.is_some() {
            self.loss.m3 = o.m3;
        }
        if o.a.is_some() {
            self.loss.a = o.a;
            if o.loss.is_none() {
                self.loss.kind = LossKind::Unified;
            }
        }
        if let Some(v) = o.samples {
            self.search.samples = v;
        }
        if let Some(v) = o.mu0 {
            self.search.mu0 = v;
        }
        if let Some(v) = o.a_min {
            self.random.a_min = v;
        }
        if let Some(v) = &o.factors {
            self.ablation.factors = v.clone();
        }
    }

    pub fn run_setup(&self) -> RunSetup {
        RunSetup {
            model: self.model.clone(),
            sgd: self.sgd.clone(),
            schedule: self.schedule.clone(),
            epochs: self.epochs,
        }
    }

    pub fn out_dir(&self, mode: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(format!("{mode}-{}", self.seed)))
    }

    /// Checks everything that does not depend on the run mode.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match d.kind {
            DatasetKind::Csv if d.path.is_none() => {
                return Err(Error::config("dataset.path", "required when dataset.kind = \"csv\""))
            }
            DatasetKind::Csv => {}
            DatasetKind::Synthetic => {
                if d.classes < 2 {
                    return Err(Error::config("dataset.classes", "must be >= 2"));
                }
                if d.dim == 0 {
                    return Err(Error::config("dataset.dim", "must be >= 1"));
                }
                if d.samples_per_class < 2 {
                    return Err(Error::config("dataset.samples_per_class", "must be >= 2"));
                }
                if !(d.noise_sigma > 0.0 && d.noise_sigma.is_finite()) {
                    return Err(Error::config("dataset.noise_sigma", "must be finite and > 0"));
                }
            }
        }
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(Error::config("dataset.train_fraction", "must be in (0, 1)"));
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::config("model.hidden", "layer widths must be >= 1"));
        }
        if self.model.embedding == 0 {
            return Err(Error::config("model.embedding", "must be >= 1"));
        }
        if !(self.model.scale > 0.0 && self.model.scale.is_finite()) {
            return Err(Error::config("model.scale", "must be finite and > 0"));
        }
        self.sgd.validate()?;
        self.schedule.validate()?;
        let s = &self.search;
        if !s.mu0.is_finite() {
            return Err(Error::config("search.mu0", "must be finite"));
        }
        self.search.settings().distribution.validate()?;
        if !(self.random.a_min <= 0.0 && self.random.a_min.is_finite()) {
            return Err(Error::config("random.a_min", "must be finite and <= 0"));
        }
        if let Some(a) = self.ablation.factors.iter().find(|a| !(**a <= 0.0 && a.is_finite())) {
            return Err(Error::config("ablation.factors", format!("factor {a} is not <= 0")));
        }
        if self.eval.pairs < 2 {
            return Err(Error::config("eval.pairs", "must be >= 2"));
        }
        if self.eval.folds < 2 {
            return Err(Error::config("eval.folds", "must be >= 2"));
        }
        self.loss.spec()?;
        Ok(())
    }
}
