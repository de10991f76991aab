//! Random-Softmax: a fresh modulating factor every epoch with no reward
//! guidance, next to plain softmax on the same data and seed.

use search_softmax::experiment::{prepare_data, ExperimentConfig};
use search_softmax::margin::MarginSpec;
use search_softmax::search::{run_fixed, run_random_schedule};

fn main() -> search_softmax::Result<()> {
    let cfg = ExperimentConfig::default();
    let data = prepare_data(&cfg)?;
    let setup = cfg.run_setup();
    let random = run_random_schedule(cfg.random.a_min, &setup, &data.train, &data.validation, 2)?;
    let plain = run_fixed(MarginSpec::Plain, &setup, &data.train, &data.validation, 2)?;

    println!("{:>5} {:>12} {:>9} {:>9}", "epoch", "a", "loss", "reward");
    for r in &random.history {
        println!(
            "{:>5} {:>12.3} {:>9.4} {:>9.4}",
            r.epoch,
            r.a.unwrap_or(f64::NAN),
            r.mean_loss,
            r.reward
        );
    }
    println!("\nrandom-softmax final {:.4}, plain softmax final {:.4}", random.reward, plain.reward);
    Ok(())
}
