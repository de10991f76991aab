//! Trains briefly, saves a checkpoint, reloads it and runs the full
//! evaluation: k-fold verification accuracy, rank-1 identification, CMC and
//! TPR at every false-accept rate the pair count can resolve.

use search_softmax::checkpoint;
use search_softmax::eval::evaluate;
use search_softmax::experiment::{prepare_data, ExperimentConfig};
use search_softmax::margin::MarginSpec;
use search_softmax::search::run_fixed;

fn main() -> search_softmax::Result<()> {
    let cfg = ExperimentConfig {
        epochs: 10,
        ..Default::default()
    };
    let data = prepare_data(&cfg)?;
    let trained = run_fixed(
        MarginSpec::AdditiveAngular { m2: 0.5 },
        &cfg.run_setup(),
        &data.train,
        &data.validation,
        4,
    )?;

    let path = std::env::temp_dir().join("evaluate_checkpoint.lfs");
    checkpoint::write(&path, &trained.model.model, &trained.model.head)?;
    let (model, head) = checkpoint::read(&path)?;
    let v = &data.validation;
    let report = evaluate(&model, &head, &v.set, &v.pairs, v.folds)?;

    println!("checkpoint            {}", path.display());
    println!("verification accuracy {:.4}", report.verification_accuracy);
    println!("rank-1                {:.4}", report.rank1);
    for (rank, rate) in report.cmc.iter().take(5) {
        println!("CMC rank {rank:<3}          {rate:.4}");
    }
    for (far, tpr) in &report.tpr_at_far {
        println!("TPR @ FAR {far:<8e}     {tpr:.4}");
    }
    Ok(())
}
