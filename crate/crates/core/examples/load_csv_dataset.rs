//! Using your own features: write a labeled CSV (feature columns then an
//! integer identity), load it back, split identities and build verification
//! pairs.

use search_softmax::datasets::{
    generate_synthetic, load_flat_file, make_pairs, split_open_set, FlatFormat, SyntheticSpec,
};
use search_softmax::numerics::RngStream;

fn main() -> search_softmax::Result<()> {
    let path = std::env::temp_dir().join("features.csv");
    let synthetic = generate_synthetic(&SyntheticSpec {
        classes: 12,
        dim: 8,
        samples_per_class: 6,
        ..Default::default()
    })?;
    synthetic.write_csv(&path)?;

    let data = load_flat_file(&path, FlatFormat::Csv)?;
    println!("{}: {} samples, {} features, {} identities", path.display(), data.len(), data.dim(), data.classes);
    assert_eq!(data, synthetic);

    let (train, eval) = split_open_set(&data, 0.75, &RngStream::new(0, "split"))?;
    let pairs = make_pairs(&eval, 40, &RngStream::new(0, "pairs"))?;
    println!("train identities {}, eval identities {}", train.classes, eval.classes);
    println!("first pairs (index1,index2,same):");
    for line in pairs.to_csv().lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
