//! Fixed-factor ablation: one training run per modulating factor, all on the
//! same data and seed. Run directories and `summary.csv` go under the
//! directory given as the first argument (a temp directory by default).

use std::path::PathBuf;

use search_softmax::experiment::{cmd_ablate_a, ExperimentConfig};

fn main() -> search_softmax::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ablate-a"));
    let mut cfg = ExperimentConfig {
        out: Some(out.clone()),
        ..Default::default()
    };
    cfg.ablation.factors = vec![0.0, -1.0, -10.0, -100.0, -1000.0, -10000.0];

    let rows = cmd_ablate_a(&cfg)?;
    println!("{:>8} {:>10} {:>8}", "a", "verif", "rank-1");
    for r in &rows {
        println!(
            "{:>8} {:>10.4} {:>8.4}",
            r.a, r.run.evaluation.verification_accuracy, r.run.evaluation.rank1
        );
    }
    println!("\nsummary in {}", out.join("summary.csv").display());
    Ok(())
}
