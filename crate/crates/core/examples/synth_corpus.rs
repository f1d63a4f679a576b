//! Generate a seeded synthetic corpus, write it to disk and summarize it.
//!
//! cargo run --example synth_corpus -- [N] [SEED]

use odyssey::synth::{corpus_stats, generate_corpus, write_synthetic, GenSpec};
use odyssey::Corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(300);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let spec = GenSpec::new(n, seed);
    let corpus = generate_corpus(&spec)?;
    let dir = tempfile::tempdir()?;
    write_synthetic(&corpus, &spec.catalog(), dir.path())?;

    // the manifest pins every episode file by digest
    let reloaded = Corpus::load_dir(dir.path())?;
    assert_eq!(reloaded.episodes, corpus.episodes);

    let stats = corpus_stats(&corpus);
    println!("{} episodes, {} steps", stats.n_episodes, stats.n_steps);
    println!("mean length {:.2}", stats.n_steps as f64 / stats.n_episodes as f64);
    for (category, count) in &stats.per_category {
        println!("  {category:<22} {count}");
    }
    for (device, count) in &stats.per_device {
        println!("  {device:<22} {count}");
    }
    let mut apps: Vec<_> = stats.app_frequency.iter().collect();
    apps.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    println!("most used apps: {:?}", &apps[..apps.len().min(5)]);
    Ok(())
}
