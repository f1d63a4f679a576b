//! Built-in agents used to calibrate the harness and the metrics.

use std::collections::HashMap;

use rand::Rng;

use super::context::AgentRequest;
use super::wire;
use super::{Agent, AgentError, AgentResponse};
use crate::episode::{Action, Corpus};
use crate::seed::rng_for;

/// Answers with the gold action of the requested step.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    gold: HashMap<(String, u32), Action>,
}

impl OracleAgent {
    pub fn new(corpus: &Corpus) -> Self {
        let mut gold = HashMap::with_capacity(corpus.total_steps());
        for ep in &corpus.episodes {
            for s in &ep.steps {
                gold.insert((ep.episode_id.clone(), s.index), s.action.clone());
            }
        }
        Self { gold }
    }

    fn gold(&self, req: &AgentRequest) -> Result<&Action, AgentError> {
        self.gold
            .get(&(req.episode_id.clone(), req.step))
            .ok_or_else(|| AgentError::Protocol(format!("unknown step {} of episode {}", req.step, req.episode_id)))
    }
}

impl Agent for OracleAgent {
    fn act(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        Ok(AgentResponse {
            action: self.gold(req)?.clone(),
            raw: None,
        })
    }
}

/// An action of a different kind than `gold`, so it can never match.
pub fn mismatching(gold: &Action) -> Action {
    if matches!(gold, Action::Home) {
        Action::Back
    } else {
        Action::Home
    }
}

/// Replaces each gold action with a mismatching one with probability `p`.
/// The coin for a step depends only on `(seed, episode_id, step)`, so the
/// outcome does not depend on scheduling.
#[derive(Debug, Clone)]
pub struct PerturbedAgent {
    oracle: OracleAgent,
    p: f64,
    seed: u64,
}

impl PerturbedAgent {
    pub fn new(corpus: &Corpus, p: f64, seed: u64) -> Result<Self, String> {
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("perturbation probability must be in [0,1], got {p}"));
        }
        Ok(Self {
            oracle: OracleAgent::new(corpus),
            p,
            seed,
        })
    }
}

impl Agent for PerturbedAgent {
    fn act(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        let gold = self.oracle.gold(req)?;
        let mut rng = rng_for(self.seed, &[b"perturb", req.episode_id.as_bytes(), &req.step.to_le_bytes()]);
        let action = if rng.random_bool(self.p) {
            mismatching(gold)
        } else {
            gold.clone()
        };
        Ok(AgentResponse { action, raw: None })
    }
}

/// Always answers the same action.
#[derive(Debug, Clone)]
pub struct ConstantAgent(pub Action);

impl Agent for ConstantAgent {
    fn act(&self, _req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        Ok(AgentResponse {
            action: self.0.clone(),
            raw: None,
        })
    }
}

/// Passes requests and responses through their wire encoding, so a run
/// exercises serialization fidelity without a process boundary.
pub struct WireLoopback<A>(pub A);

impl<A: Agent> Agent for WireLoopback<A> {
    fn act(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        let req = wire::decode_request(&wire::encode_request(req)).map_err(AgentError::Protocol)?;
        let line = match self.0.act(&req) {
            Ok(resp) => wire::encode_response(&resp),
            Err(e) => wire::encode_error(&e.to_string()),
        };
        wire::decode_response(&line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::context::build_context;
    use crate::metrics::InstructionLevel;
    use crate::synth::{generate_corpus, GenSpec};

    #[test]
    fn perturbed_extremes() {
        let c = generate_corpus(&GenSpec::new(20, 2)).unwrap();
        let none = PerturbedAgent::new(&c, 0.0, 1).unwrap();
        let all = PerturbedAgent::new(&c, 1.0, 1).unwrap();
        for ep in &c.episodes {
            for s in &ep.steps {
                let req = build_context(ep, s.index, InstructionLevel::High, 4).unwrap();
                assert_eq!(none.act(&req).unwrap().action, s.action);
                assert_ne!(all.act(&req).unwrap().action.kind(), s.action.kind());
            }
        }
        assert!(PerturbedAgent::new(&c, 1.5, 1).is_err());
    }

    #[test]
    fn oracle_unknown_step_is_protocol_error() {
        let c = generate_corpus(&GenSpec::new(2, 2)).unwrap();
        let mut req = build_context(&c.episodes[0], 1, InstructionLevel::High, 4).unwrap();
        req.step = 999;
        assert!(matches!(OracleAgent::new(&c).act(&req), Err(AgentError::Protocol(_))));
        assert!(matches!(
            WireLoopback(OracleAgent::new(&c)).act(&req),
            Err(AgentError::Protocol(_))
        ));
    }
}
