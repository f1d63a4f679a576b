//! The four train/test partitions over one synthetic corpus.

use odyssey::splits::{split, SplitSpec, Strategy};
use odyssey::synth::{generate_corpus, GenSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GenSpec::new(1000, 5);
    let corpus = generate_corpus(&spec)?;
    let strategies = [
        Strategy::Random { ratio: 0.8 },
        Strategy::Task { test_fraction: 1.0 / 7.0 },
        Strategy::Device { device_name: "Tablet".into() },
        Strategy::App {
            category_map: spec.catalog().category_map(),
            holdout_per_category: 1,
            target_test_fraction: 0.15,
        },
    ];
    for strategy in strategies {
        let s = SplitSpec::new(strategy, Some(42));
        let result = split(&corpus, &s)?;
        let frac = result.test.len() as f64 / corpus.len() as f64;
        println!(
            "{:<7} train {:>4}  test {:>4} ({:.1}%)  held out {}",
            s.strategy.name(),
            result.train.len(),
            result.test.len(),
            100.0 * frac,
            result.held_out.len()
        );
        println!("        {}", s.provenance());
    }

    // a device nobody recorded on cannot form a test set
    let missing = SplitSpec::new(Strategy::Device { device_name: "Watch".into() }, None);
    println!("{}", split(&corpus, &missing).unwrap_err());
    Ok(())
}
