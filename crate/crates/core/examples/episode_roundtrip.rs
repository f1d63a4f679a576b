//! Serialize an episode, parse it back, and see what validation and the
//! parser say about broken input.

use odyssey::episode::{parse_episode, serialize_episode, validate_structure};
use odyssey::synth::{generate_corpus, GenSpec};
use odyssey::Action;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_corpus(&GenSpec::new(3, 1))?;
    let ep = &corpus.episodes[0];

    let bytes = serialize_episode(ep)?;
    let back = parse_episode(&bytes)?;
    assert_eq!(&back, ep);
    // canonical form: serializing twice gives the same bytes
    assert_eq!(serialize_episode(&back)?, bytes);
    println!("{}: {} steps, {} bytes", ep.episode_id, ep.len(), bytes.len());
    for step in ep.steps.iter().take(4) {
        println!("  step {} {}", step.index, step.action);
    }

    // an unknown action kind is a parse error with a JSON path
    let text = String::from_utf8(bytes.clone())?.replacen("\"CLICK\"", "\"TAP\"", 1);
    if let Err(e) = parse_episode(text.as_bytes()) {
        println!("parse error: {e}");
    }

    // a terminal action in the middle parses but fails validation
    let mut broken = ep.clone();
    broken.steps[0].action = Action::Complete;
    for v in validate_structure(&broken, None) {
        println!("violation: {v}");
    }
    Ok(())
}
