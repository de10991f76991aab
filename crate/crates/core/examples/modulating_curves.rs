//! Writes h(a, p) and p_m = h(a, p)·p on a grid of p for several factors, the
//! data behind a plot of how a negative factor shrinks the target probability.
//!
//! Usage: cargo run --example modulating_curves [OUTPUT.csv]

use std::path::PathBuf;

use search_softmax::experiment::cmd_export_curves;
use search_softmax::margin::modulating_function;

fn main() -> search_softmax::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("modulating_curves.csv"));
    let factors = [0.0, -1.0, -10.0, -100.0, -1000.0];
    cmd_export_curves(&factors, &out)?;
    println!("wrote {}", out.display());

    println!("\n{:>8} {:>10} {:>10} {:>10}", "a", "h(a,0.5)", "h(a,0.9)", "h(a,0.99)");
    for a in factors {
        println!(
            "{a:>8} {:>10.5} {:>10.5} {:>10.5}",
            modulating_function(a, 0.5)?,
            modulating_function(a, 0.9)?,
            modulating_function(a, 0.99)?
        );
    }
    Ok(())
}
