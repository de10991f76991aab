//! Command-line front end. Exit codes: 0 success, 1 internal error, 2 config
//! error, 3 data or format error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use super::commands::{
    cmd_ablate_a, cmd_eval, cmd_export_curves, cmd_random_schedule, cmd_search, cmd_train_fixed, RunSummary,
};
use super::config::{ExperimentConfig, LossKind, Overrides};
use crate::error::{Error, Result};
use crate::numerics::fmt_g17;

#[derive(Debug, Parser)]
#[command(name = "search-softmax", version, about = "Margin-softmax training and modulating-factor search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with one fixed loss.
    TrainFixed(RunArgs),
    /// Reward-guided search over the modulating factor.
    Search(RunArgs),
    /// Resample the modulating factor every epoch without guidance.
    RandomSchedule(RunArgs),
    /// One fixed-factor run per factor, with a summary table.
    AblateA(RunArgs),
    /// Evaluate a checkpoint on a labeled CSV dataset.
    Eval(EvalArgs),
    /// Write h(a, p) and h(a, p)·p curves as CSV.
    ExportCurves(CurveArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for candidate training and evaluation.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Labeled CSV dataset (last column is the identity).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// plain | sphere | arc | am | combined | unified
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub m1: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub m2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m3: Option<f64>,
    /// Modulating factor for the unified loss.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Candidates per search epoch.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a_min: Option<f64>,
    /// Comma-separated factors for ablate-a.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub factors: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Pair list CSV (`index1,index2,same`); drawn from the seed when absent.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 6000)]
    pub n_pairs: usize,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated factors.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,-1,-10,-100")]
    pub a: Vec<f64>,
}

impl CommonArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        match &self.config {
            Some(path) => ExperimentConfig::load(path),
            None => Ok(ExperimentConfig::default()),
        }
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.common.config()?;
        let loss = self.loss.as_deref().map(str::parse::<LossKind>).transpose()?;
        cfg.apply(&Overrides {
            seed: self.common.seed,
            out: self.common.out.clone(),
            epochs: self.epochs,
            dataset: self.dataset.clone(),
            loss,
            m1: self.m1,
            m2: self.m2,
            m3: self.m3,
            a: self.a,
            samples: self.samples,
            mu0: self.mu0,
            a_min: self.a_min,
            factors: self.factors.clone(),
        });
        Ok(cfg)
    }
}

fn print_run(s: &RunSummary) {
    println!("run {} -> {}", s.run_id, s.dir.display());
    println!("final reward          {}", fmt_g17(s.final_reward));
    println!("verification accuracy {}", fmt_g17(s.evaluation.verification_accuracy));
    println!("rank-1                {}", fmt_g17(s.evaluation.rank1));
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::TrainFixed(args) => print_run(&cmd_train_fixed(&args.resolve()?)?),
        Command::Search(args) => print_run(&cmd_search(&args.resolve()?)?),
        Command::RandomSchedule(args) => print_run(&cmd_random_schedule(&args.resolve()?)?),
        Command::AblateA(args) => {
            let rows = cmd_ablate_a(&args.resolve()?)?;
            println!("{:>12} {:>12} {:>12} {:>12}", "a", "reward", "verif", "rank1");
            for r in rows {
                println!(
                    "{:>12} {:>12.6} {:>12.6} {:>12.6}",
                    fmt_g17(r.a),
                    r.run.final_reward,
                    r.run.evaluation.verification_accuracy,
                    r.run.evaluation.rank1
                );
            }
        }
        Command::Eval(args) => {
            let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("eval"));
            let report = cmd_eval(
                &args.checkpoint,
                &args.dataset,
                args.pairs.as_deref(),
                args.n_pairs,
                args.folds,
                args.common.seed.unwrap_or(0),
                &out,
            )?;
            println!("verification accuracy {}", fmt_g17(report.verification_accuracy));
            println!("rank-1                {}", fmt_g17(report.rank1));
            for (far, tpr) in &report.tpr_at_far {
                println!("TPR@FAR={:<8} {}", fmt_g17(*far), fmt_g17(*tpr));
            }
        }
        Command::ExportCurves(args) => {
            let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let path = out.join("curves.csv");
            cmd_export_curves(&args.a, &path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn threads(command: &Command) -> Option<usize> {
    match command {
        Command::TrainFixed(a) | Command::Search(a) | Command::RandomSchedule(a) | Command::AblateA(a) => {
            a.common.threads
        }
        Command::Eval(a) => a.common.threads,
        Command::ExportCurves(a) => a.common.threads,
    }
}

/// Runs a parsed command on a pool of the requested size.
pub fn run(cli: Cli) -> Result<()> {
    match threads(&cli.command) {
        Some(0) => Err(Error::config("threads", "must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Contract(format!("thread pool: {e}")))?
            .install(|| execute(cli.command)),
        None => execute(cli.command),
    }
}

/// Parses `std::env::args`, runs, and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
