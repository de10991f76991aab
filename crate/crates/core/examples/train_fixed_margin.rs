//! Trains the same model with plain softmax and with an additive cosine
//! margin, on the same data and seed, and compares validation accuracy on
//! identities never seen in training.

use search_softmax::experiment::{prepare_data, ExperimentConfig};
use search_softmax::margin::MarginSpec;
use search_softmax::search::run_fixed;

fn main() -> search_softmax::Result<()> {
    let cfg = ExperimentConfig {
        epochs: 20,
        ..Default::default()
    };
    let data = prepare_data(&cfg)?;
    println!(
        "{} training identities ({} samples), {} validation identities, {} pairs",
        data.train.classes,
        data.train.len(),
        data.validation.set.classes,
        data.validation.pairs.len()
    );

    for spec in [MarginSpec::Plain, MarginSpec::Additive { m3: 0.35 }] {
        let out = run_fixed(spec, &cfg.run_setup(), &data.train, &data.validation, 1)?;
        let first = &out.history[0];
        let last = out.history.last().expect("epochs > 0");
        println!(
            "{:<8} loss {:.3} -> {:.3}   verification {:.4} -> {:.4}",
            spec.name(),
            first.mean_loss,
            last.mean_loss,
            first.reward,
            last.reward
        );
    }
    Ok(())
}
