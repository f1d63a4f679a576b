//! Teacher-forced evaluation: built-in agents, the wire protocol loopback,
//! and what a request looks like.

use odyssey::harness::{
    evaluate_offline, request_for, wire, ConstantAgent, HarnessConfig, OracleAgent, PerturbedAgent, WireLoopback,
};
use odyssey::metrics::{ams, success_rate};
use odyssey::synth::{generate_corpus, GenSpec};
use odyssey::Action;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_corpus(&GenSpec::new(100, 9))?;
    let config = HarnessConfig {
        jobs: 4,
        ..HarnessConfig::default()
    };

    // each step sees the gold history, never the agent's own earlier output
    let req = request_for(&corpus.episodes[0], 3, &config, None)?;
    println!("{}\n", wire::encode_request(&req));

    let oracle = OracleAgent::new(&corpus);
    let agents: Vec<(&str, Box<dyn odyssey::harness::Agent>)> = vec![
        ("oracle", Box::new(OracleAgent::new(&corpus))),
        ("oracle over the wire", Box::new(WireLoopback(oracle))),
        ("perturbed 0.1", Box::new(PerturbedAgent::new(&corpus, 0.1, 1)?)),
        ("always HOME", Box::new(ConstantAgent(Action::Home))),
    ];
    for (name, agent) in &agents {
        let run = evaluate_offline(&corpus, agent, &config)?;
        println!(
            "{name:<22} AMS {:.4}  SR {:.4}  failures: {}",
            ams(&run.records)?,
            success_rate(&run.records)?,
            run.failures
        );
    }
    Ok(())
}
