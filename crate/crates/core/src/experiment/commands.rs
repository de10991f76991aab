//! The experiment commands. Each one validates its config, owns one run
//! directory and returns a summary; printing is left to the caller.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{DatasetKind, ExperimentConfig, LossKind};
use super::metrics::{to_json_pretty, JsonlWriter, MetricRecord, TimingRecord};
use crate::checkpoint;
use crate::datasets::{
    generate_synthetic, load_flat_file, make_pairs, split_closed_set, split_open_set, FlatFormat, LabeledDataset,
    PairSet,
};
use crate::error::{Error, Result};
use crate::eval::{cmc_csv, evaluate, points_csv, EvaluationReport, RewardKind, Validation};
use crate::margin::raw_modulating_function;
use crate::numerics::{fmt_g17, RngStream};
use crate::search::{FactorSchedule, ScheduleRun, SearchRun};
use crate::trainer::TrainState;

/// Training identities and the validation data rewards are computed on.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub validation: Validation,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    match cfg.dataset.kind {
        DatasetKind::Synthetic => generate_synthetic(&cfg.dataset.synthetic_spec()),
        DatasetKind::Csv => {
            let path = cfg
                .dataset
                .path
                .as_ref()
                .ok_or_else(|| Error::config("dataset.path", "required when dataset.kind = \"csv\""))?;
            load_flat_file(path, FlatFormat::Csv)
        }
    }
}

/// Splits by `dataset.seed` so every run seed sees the same split and pairs.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let dataset = load_dataset(cfg)?;
    let stream = RngStream::new(cfg.dataset.seed, "data");
    let frac = cfg.dataset.train_fraction;
    let (train, val) = match cfg.eval.reward {
        RewardKind::Verification => split_open_set(&dataset, frac, &stream.child("split")),
        RewardKind::ClosedSet => split_closed_set(&dataset, 1.0 - frac, &stream.child("split")),
    }
    .map_err(|e| Error::config("dataset.train_fraction", e.to_string()))?;
    let pairs = make_pairs(&val, cfg.eval.pairs, &stream.child("pairs"))
        .map_err(|e| Error::config("eval.pairs", e.to_string()))?;
    let validation = Validation::new(val, pairs, cfg.eval.folds, cfg.eval.reward)?;
    Ok(PreparedData { train, validation })
}

/// What a finished run left behind.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub mode: String,
    #[serde(skip)]
    pub dir: PathBuf,
    /// Validation score of the returned model.
    pub final_reward: f64,
    pub parameter_digest: String,
    pub evaluation: EvaluationReport,
}

struct RunDir {
    path: PathBuf,
    run_id: String,
    mode: String,
    metrics: JsonlWriter,
    timings: JsonlWriter,
    convergence: String,
}

impl RunDir {
    fn create(cfg: &ExperimentConfig, mode: &str) -> Result<Self> {
        let path = cfg.out_dir(mode);
        create_dir(&path)?;
        let mut resolved = cfg.clone();
        resolved.out = Some(path.clone());
        write_file(&path.join("config.toml"), &resolved.to_toml()?)?;
        Ok(RunDir {
            metrics: JsonlWriter::create(&path.join("metrics.jsonl"))?,
            timings: JsonlWriter::create(&path.join("timings.jsonl"))?,
            run_id: format!("{mode}-{}", cfg.seed),
            mode: mode.to_owned(),
            convergence: String::from("epoch,mean_loss,reward\n"),
            path,
        })
    }

    fn record(&mut self, rec: &MetricRecord, seconds: f64) -> Result<()> {
        self.metrics.append(rec)?;
        self.timings.append(&TimingRecord {
            run_id: self.run_id.clone(),
            epoch: rec.epoch,
            seconds,
        })?;
        let _ = writeln!(
            self.convergence,
            "{},{},{}",
            rec.epoch,
            fmt_g17(rec.mean_loss),
            fmt_g17(rec.reward)
        );
        Ok(())
    }

    /// Final checkpoint, evaluation report and plot CSVs.
    fn finish(self, state: &TrainState, final_reward: f64, validation: &Validation) -> Result<RunSummary> {
        checkpoint::write(&self.path.join("model.lfs"), &state.model, &state.head)?;
        write_file(&self.path.join("convergence.csv"), &self.convergence)?;
        write_file(&self.path.join("validation.csv"), &validation.set.to_csv())?;
        write_file(&self.path.join("pairs.csv"), &validation.pairs.to_csv())?;
        let evaluation = evaluate(
            &state.model,
            &state.head,
            &validation.set,
            &validation.pairs,
            validation.folds,
        )?;
        let summary = RunSummary {
            run_id: self.run_id,
            mode: self.mode,
            dir: self.path,
            final_reward,
            parameter_digest: state.digest(),
            evaluation,
        };
        write_evaluation(&summary.dir, &summary.evaluation)?;
        write_file(&summary.dir.join("report.json"), &to_json_pretty(&summary)?)?;
        Ok(summary)
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_evaluation(dir: &Path, report: &EvaluationReport) -> Result<()> {
    write_file(&dir.join("roc.csv"), &points_csv(&report.verification.roc_points))?;
    write_file(&dir.join("cmc.csv"), &cmc_csv(&report.cmc))
}

fn run_schedule(
    cfg: &ExperimentConfig,
    mode: &str,
    schedule: FactorSchedule,
    data: &PreparedData,
) -> Result<RunSummary> {
    let mut dir = RunDir::create(cfg, mode)?;
    let mut run = ScheduleRun::new(schedule, &cfg.run_setup(), &data.train, &data.validation, cfg.seed)?;
    for _ in 0..cfg.epochs {
        let start = Instant::now();
        let rec = MetricRecord::from_epoch(&dir.run_id, mode, run.step()?);
        dir.record(&rec, start.elapsed().as_secs_f64())?;
    }
    let outcome = run.finish()?;
    dir.finish(&outcome.model, outcome.reward, &data.validation)
}

/// Trains one model with the configured fixed loss.
pub fn cmd_train_fixed(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let spec = cfg.loss.spec()?;
    let data = prepare_data(cfg)?;
    run_schedule(cfg, "train-fixed", FactorSchedule::Fixed(spec), &data)
}

/// Random-Softmax: a fresh factor in `[random.a_min, 0]` every epoch.
pub fn cmd_random_schedule(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let schedule = FactorSchedule::Random {
        a_min: cfg.random.a_min,
    };
    run_schedule(cfg, "random-schedule", schedule, &data)
}

/// Reward-guided search. Besides the common files the run directory holds
/// `winners/epochNNN.lfs` and `mu_trajectory.csv`.
pub fn cmd_search(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let mut dir = RunDir::create(cfg, "search")?;
    let winners = dir.path.join("winners");
    create_dir(&winners)?;
    let settings = cfg.search.settings();
    let mut run = SearchRun::new(&settings, &cfg.run_setup(), &data.train, &data.validation, cfg.seed)?;
    let mut mu_csv = format!("epoch,mu\n0,{}\n", fmt_g17(run.mu()));
    for _ in 0..cfg.epochs {
        let start = Instant::now();
        let rec = MetricRecord::from_search(&dir.run_id, run.step()?);
        let state = run.current();
        checkpoint::write(
            &winners.join(format!("epoch{:03}.lfs", rec.epoch)),
            &state.model,
            &state.head,
        )?;
        let _ = writeln!(mu_csv, "{},{}", rec.epoch + 1, fmt_g17(run.mu()));
        dir.record(&rec, start.elapsed().as_secs_f64())?;
    }
    write_file(&dir.path.join("mu_trajectory.csv"), &mu_csv)?;
    let outcome = run.finish()?;
    dir.finish(&outcome.model, outcome.reward, &data.validation)
}

/// One row of the ablation table.
#[derive(Clone, Debug)]
pub struct AblationRow {
    pub a: f64,
    pub run: RunSummary,
}

/// One fixed-factor run per entry of `ablation.factors`, all on the same
/// data and seed, in subdirectories `a_<factor>` of the run directory. Writes
/// `summary.csv` next to them.
pub fn cmd_ablate_a(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let root = cfg.out_dir("ablate-a");
    create_dir(&root)?;
    let mut rows = Vec::new();
    for &a in &cfg.ablation.factors {
        let mut sub = cfg.clone();
        sub.loss.kind = LossKind::Unified;
        sub.loss.a = Some(a);
        sub.out = Some(root.join(format!("a_{}", fmt_g17(a))));
        let spec = sub.loss.spec()?;
        let run = run_schedule(&sub, "train-fixed", FactorSchedule::Fixed(spec), &data)?;
        rows.push(AblationRow { a, run });
    }
    write_file(&root.join("summary.csv"), &ablation_csv(&rows))?;
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("a,final_reward,verification_accuracy,rank1\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_g17(r.a),
            fmt_g17(r.run.final_reward),
            fmt_g17(r.run.evaluation.verification_accuracy),
            fmt_g17(r.run.evaluation.rank1)
        );
    }
    out
}

/// Evaluates a checkpoint on a labeled CSV dataset. Pairs come from
/// `pairs` when given, otherwise `n_pairs` are drawn with `seed`. Writes
/// `report.json`, `roc.csv` and `cmc.csv` into `out`.
pub fn cmd_eval(
    checkpoint_path: &Path,
    dataset_path: &Path,
    pairs: Option<&Path>,
    n_pairs: usize,
    folds: usize,
    seed: u64,
    out: &Path,
) -> Result<EvaluationReport> {
    let (model, head) = checkpoint::read(checkpoint_path)?;
    let dataset = load_flat_file(dataset_path, FlatFormat::Csv)?;
    if dataset.dim() != model.input_dim() {
        return Err(Error::Format(format!(
            "dataset has {} features but the checkpoint expects {}",
            dataset.dim(),
            model.input_dim()
        )));
    }
    let pairs = match pairs {
        Some(p) => PairSet::load_csv(p)?,
        None => make_pairs(&dataset, n_pairs, &RngStream::new(seed, "eval-pairs"))
            .map_err(|e| Error::config("eval.pairs", e.to_string()))?,
    };
    if let Err(e) = pairs.check_against(&dataset) {
        return Err(Error::Format(e.to_string()));
    }
    let report = evaluate(&model, &head, &dataset, &pairs, folds)?;
    create_dir(out)?;
    write_evaluation(out, &report)?;
    write_file(&out.join("report.json"), &to_json_pretty(&report)?)?;
    Ok(report)
}

/// `a,p,h,p_m` for every factor at `p = 0, 0.001, …, 1`.
pub fn curves_csv(factors: &[f64]) -> Result<String> {
    if let Some(a) = factors.iter().find(|a| !(**a <= 0.0 && a.is_finite())) {
        return Err(Error::config("a", format!("factor {a} is not <= 0")));
    }
    let mut out = String::from("a,p,h,p_m\n");
    for &a in factors {
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            let h = raw_modulating_function(a, p, 1.0 - p);
            let _ = writeln!(out, "{},{},{},{}", fmt_g17(a), fmt_g17(p), fmt_g17(h), fmt_g17(h * p));
        }
    }
    Ok(out)
}

pub fn cmd_export_curves(factors: &[f64], output: &Path) -> Result<()> {
    let csv = curves_csv(factors)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(output, &csv)
}
