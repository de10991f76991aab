//! Reward-guided search over the modulating factor, one epoch at a time.
//!
//! Each epoch samples B factors around μ, trains one candidate per factor
//! from the current model, scores them on held-out identities, moves μ
//! toward the better factors and continues from the best candidate.

use search_softmax::experiment::{prepare_data, ExperimentConfig};
use search_softmax::search::SearchRun;

fn main() -> search_softmax::Result<()> {
    let cfg = ExperimentConfig {
        epochs: 12,
        ..Default::default()
    };
    let data = prepare_data(&cfg)?;
    let settings = cfg.search.settings();
    let mut run = SearchRun::new(&settings, &cfg.run_setup(), &data.train, &data.validation, 3)?;

    println!("{:>5} {:>9} {:>9}  {:<44} {:>6}", "epoch", "mu", "mu'", "factors", "winner");
    for _ in 0..cfg.epochs {
        let rec = run.step()?;
        let factors: Vec<String> = rec.factors().iter().map(|a| format!("{a:.2}")).collect();
        println!(
            "{:>5} {:>9.4} {:>9.4}  {:<44} {:>6} ({:.4})",
            rec.epoch,
            rec.mu_before,
            rec.mu_after,
            factors.join(" "),
            rec.winner,
            rec.winner_reward()
        );
    }
    let out = run.finish()?;
    println!("\nbest validation accuracy {:.4}", out.reward);
    Ok(())
}
