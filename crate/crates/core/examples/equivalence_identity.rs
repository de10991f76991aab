//! Every margin loss rescales the target softmax probability by h(a, p).
//!
//! For a random row of cosines this prints the softmax probability p, the
//! modulating factor a of each margin function, and the margin probability
//! computed two ways: directly from the margin-adjusted logits, and as
//! h(a, p)·p.

use rand::Rng;
use search_softmax::margin::{
    margin_probability, modulating_factor, modulating_function, softmax_probability, LogitRow, MarginSpec,
};
use search_softmax::numerics::RngStream;

fn main() -> search_softmax::Result<()> {
    let mut rng = RngStream::new(7, "example").rng();
    let mut cosines: Vec<f64> = (0..10).map(|_| rng.random_range(-0.3..0.3)).collect();
    cosines[3] = 0.25;
    let row = LogitRow::new(&cosines, 3, 32.0)?;
    let p = softmax_probability(&row);
    println!("softmax probability p = {p:.6}\n");
    println!("{:<10} {:>14} {:>14} {:>14}", "margin", "a", "p_m direct", "h(a,p)*p");

    let specs = [
        MarginSpec::Plain,
        MarginSpec::Angular { m1: 2 },
        MarginSpec::AdditiveAngular { m2: 0.5 },
        MarginSpec::Additive { m3: 0.35 },
        MarginSpec::Combined { m1: 1, m2: 0.3, m3: 0.2 },
    ];
    for spec in specs {
        let a = modulating_factor(spec, row.cosines()[3], row.scale())?;
        let direct = margin_probability(spec, &row)?;
        let via_h = modulating_function(a, p)? * p;
        println!("{:<10} {a:>14.6e} {direct:>14.6e} {via_h:>14.6e}", spec.name());
    }
    Ok(())
}
