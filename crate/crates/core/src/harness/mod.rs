//! Teacher-forced offline evaluation.
//!
//! For every step of every episode the harness builds a request from gold
//! data only ([`build_context`]), asks the agent for an action and scores it
//! with [`match_step`]. Agent answers never feed back into later requests.
//!
//! Failure accounting:
//! - timeouts, malformed replies and agent refusals score as a miss
//!   (`type-mismatch`) and the run continues;
//! - transport failures are retried `retries` times, after which the run
//!   aborts and returns the records scored so far.

mod agents;
mod context;
mod external;
pub mod wire;

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use thiserror::Error;

pub use agents::{mismatching, ConstantAgent, OracleAgent, PerturbedAgent, WireLoopback};
pub use context::{
    build_context, build_context_windowed, AgentRequest, ContextError, DeviceSummary, ImageRef,
    DEFAULT_DELTA, PROTOCOL,
};
pub use external::{HttpAgent, SubprocessAgent};

use crate::episode::{Action, Corpus, Episode};
use crate::matching::{match_step, MatchReason};
use crate::metrics::{EvalRecord, InstructionLevel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentResponse {
    pub action: Action,
    /// The agent's unparsed output, kept for audit.
    pub raw: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("agent timed out")]
    Timeout,
    #[error("malformed agent response ({message}): {raw}")]
    Malformed { raw: String, message: String },
    #[error("agent transport failure: {0}")]
    Transport(String),
    #[error("agent refused the request: {0}")]
    Protocol(String),
}

/// Anything that answers agent requests. Implementations must be shareable
/// across the evaluation workers.
pub trait Agent: Send + Sync {
    fn act(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError>;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn act(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        (**self).act(req)
    }
}

/// How screenshots are put on the wire.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ImageMode {
    /// Paths resolved against the corpus root when it is known.
    #[default]
    Path,
    /// File contents, base64 encoded.
    Inline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    /// History screenshots per request.
    pub delta: usize,
    pub level: InstructionLevel,
    /// Keep only this many history actions; `None` sends all.
    pub action_window: Option<usize>,
    /// Episodes evaluated concurrently.
    pub jobs: usize,
    pub timeout: Duration,
    /// Extra attempts after a transport failure.
    pub retries: u32,
    pub images: ImageMode,
    /// Stored in every record's `split` field.
    pub split_label: Option<String>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            level: InstructionLevel::High,
            action_window: None,
            jobs: 1,
            timeout: Duration::from_secs(10),
            retries: 2,
            images: ImageMode::Path,
            split_label: None,
        }
    }
}

impl HarnessConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.timeout.is_zero() {
            return Err("timeout must be positive".into());
        }
        if self.jobs == 0 {
            return Err("jobs must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("screenshot {path}: {message}")]
    Image { path: String, message: String },
    #[error("episode {episode_id} step {step}: {error}")]
    Agent {
        episode_id: String,
        step: u32,
        error: AgentError,
    },
    #[error("harness configuration: {0}")]
    Config(String),
}

/// Counts of agent failures that were scored as misses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FailureCounts {
    pub timeouts: usize,
    pub malformed: usize,
    pub refused: usize,
    /// Transport failures that a retry recovered from.
    pub retried: usize,
}

impl FailureCounts {
    fn merge(&mut self, o: FailureCounts) {
        self.timeouts += o.timeouts;
        self.malformed += o.malformed;
        self.refused += o.refused;
        self.retried += o.retried;
    }
}

impl fmt::Display for FailureCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "timeouts={} malformed={} refused={} retried={}",
            self.timeouts, self.malformed, self.refused, self.retried
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    /// In corpus order, steps in index order.
    pub records: Vec<EvalRecord>,
    pub failures: FailureCounts,
}

/// A run that stopped early. `partial` holds every record scored before
/// the failure, in corpus order.
#[derive(Debug, Error)]
#[error("evaluation aborted after {} records: {error}", partial.len())]
pub struct EvalAbort {
    pub partial: Vec<EvalRecord>,
    pub failures: FailureCounts,
    #[source]
    pub error: HarnessError,
}

fn resolve_image(r: ImageRef, root: Option<&Path>, mode: ImageMode) -> Result<ImageRef, HarnessError> {
    let ImageRef::Path(rel) = r else { return Ok(r) };
    let full = match root {
        Some(root) => root.join(&rel),
        None => rel.clone().into(),
    };
    match mode {
        ImageMode::Path => Ok(ImageRef::Path(full.display().to_string())),
        ImageMode::Inline => {
            let bytes = fs::read(&full).map_err(|e| HarnessError::Image {
                path: full.display().to_string(),
                message: e.to_string(),
            })?;
            Ok(ImageRef::B64(base64::engine::general_purpose::STANDARD.encode(bytes)))
        }
    }
}

/// Builds the request for step `t`, with screenshots put in wire form.
pub fn request_for(
    episode: &Episode,
    t: u32,
    config: &HarnessConfig,
    root: Option<&Path>,
) -> Result<AgentRequest, HarnessError> {
    let mut req = build_context_windowed(episode, t, config.level, config.delta, config.action_window)?;
    req.screenshot = resolve_image(req.screenshot, root, config.images)?;
    req.history_screenshots = req
        .history_screenshots
        .into_iter()
        .map(|r| resolve_image(r, root, config.images))
        .collect::<Result<_, _>>()?;
    Ok(req)
}

struct EpisodeOutcome {
    records: Vec<EvalRecord>,
    failures: FailureCounts,
    error: Option<HarnessError>,
}

fn evaluate_episode(ep: &Episode, agent: &dyn Agent, config: &HarnessConfig, root: Option<&Path>) -> EpisodeOutcome {
    let mut out = EpisodeOutcome {
        records: Vec::with_capacity(ep.len()),
        failures: FailureCounts::default(),
        error: None,
    };
    for step in &ep.steps {
        let req = match request_for(ep, step.index, config, root) {
            Ok(r) => r,
            Err(e) => {
                out.error = Some(e);
                return out;
            }
        };
        let mut attempt = 0;
        let answer = loop {
            match agent.act(&req) {
                Err(AgentError::Transport(msg)) if attempt < config.retries => {
                    attempt += 1;
                    out.failures.retried += 1;
                    log::warn!("{} step {}: {msg}; retry {attempt}", ep.episode_id, step.index);
                }
                other => break other,
            }
        };
        let (outcome, predicted) = match answer {
            Ok(resp) => {
                let outcome = match_step(&resp.action, &step.action, &ep.device_info, step.bbox.as_ref());
                (outcome, resp.action.to_string())
            }
            Err(error @ AgentError::Transport(_)) => {
                out.error = Some(HarnessError::Agent {
                    episode_id: ep.episode_id.clone(),
                    step: step.index,
                    error,
                });
                return out;
            }
            Err(error) => {
                log::warn!("{} step {}: {error}; scored as a miss", ep.episode_id, step.index);
                let predicted = match &error {
                    AgentError::Timeout => {
                        out.failures.timeouts += 1;
                        "<timeout>".to_string()
                    }
                    AgentError::Malformed { raw, .. } => {
                        out.failures.malformed += 1;
                        raw.clone()
                    }
                    _ => {
                        out.failures.refused += 1;
                        format!("<{error}>")
                    }
                };
                (MatchReason::TypeMismatch.into(), predicted)
            }
        };
        out.records.push(EvalRecord {
            episode_id: ep.episode_id.clone(),
            step: step.index,
            instruction_level: config.level,
            outcome,
            category: ep.task_info.category,
            device: ep.device_info.name.clone(),
            episode_steps: ep.step_length,
            split: config.split_label.clone(),
            gold: Some(step.action.to_string()),
            predicted: Some(predicted),
        });
    }
    out
}

/// Scores every step of `corpus` against `agent`. Episodes run on up to
/// `config.jobs` threads; steps within an episode run in order.
pub fn evaluate_offline(corpus: &Corpus, agent: &dyn Agent, config: &HarnessConfig) -> Result<EvalRun, EvalAbort> {
    if let Err(msg) = config.check() {
        return Err(EvalAbort {
            partial: Vec::new(),
            failures: FailureCounts::default(),
            error: HarnessError::Config(msg),
        });
    }
    let root = corpus.root.as_deref();
    let n = corpus.len();
    let results: Vec<Mutex<Option<EpisodeOutcome>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);

    std::thread::scope(|s| {
        for _ in 0..config.jobs.min(n.max(1)) {
            s.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let outcome = evaluate_episode(&corpus.episodes[i], agent, config, root);
                if outcome.error.is_some() {
                    stop.store(true, Ordering::SeqCst);
                }
                *results[i].lock().expect("result slot") = Some(outcome);
            });
        }
    });

    let mut records = Vec::with_capacity(corpus.total_steps());
    let mut failures = FailureCounts::default();
    let mut first_error = None;
    for slot in results {
        let Some(outcome) = slot.into_inner().expect("result slot") else {
            continue;
        };
        records.extend(outcome.records);
        failures.merge(outcome.failures);
        if first_error.is_none() {
            first_error = outcome.error;
        }
    }
    match first_error {
        None => Ok(EvalRun { records, failures }),
        Some(error) => Err(EvalAbort {
            partial: records,
            failures,
            error,
        }),
    }
}

/// Turns an agent spec into an agent:
///
/// - `builtin:oracle`, `builtin:home`, `builtin:perturbed:P[:SEED]`
/// - `http://...` for an HTTP endpoint
/// - anything else is a shell command speaking the wire protocol on stdio
pub fn agent_from_spec(spec: &str, corpus: &Corpus, config: &HarnessConfig) -> Result<Box<dyn Agent>, String> {
    if let Some(rest) = spec.strip_prefix("builtin:") {
        let parts: Vec<&str> = rest.split(':').collect();
        return match parts.as_slice() {
            ["oracle"] => Ok(Box::new(OracleAgent::new(corpus))),
            ["home"] => Ok(Box::new(ConstantAgent(Action::Home))),
            ["perturbed", p, seed @ ..] if seed.len() <= 1 => {
                let p: f64 = p.parse().map_err(|_| format!("bad perturbation probability {p:?}"))?;
                let seed = match seed.first() {
                    Some(s) => s.parse().map_err(|_| format!("bad seed {s:?}"))?,
                    None => 0,
                };
                Ok(Box::new(PerturbedAgent::new(corpus, p, seed)?))
            }
            _ => Err(format!("unknown builtin agent {spec:?}")),
        };
    }
    if spec.starts_with("http://") || spec.starts_with("https://") {
        return Ok(Box::new(HttpAgent::new(spec, config.timeout)));
    }
    if spec.trim().is_empty() {
        return Err("empty agent command".into());
    }
    Ok(Box::new(SubprocessAgent::new(spec, config.jobs, config.timeout)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ams, success_rate};
    use crate::synth::{generate_corpus, GenSpec};

    fn corpus() -> Corpus {
        generate_corpus(&GenSpec::new(30, 4)).unwrap()
    }

    #[test]
    fn oracle_scores_everything() {
        let c = corpus();
        let run = evaluate_offline(&c, &OracleAgent::new(&c), &HarnessConfig::default()).unwrap();
        assert_eq!(run.records.len(), c.total_steps());
        assert_eq!(ams(&run.records).unwrap(), 1.0);
        assert_eq!(success_rate(&run.records).unwrap(), 1.0);
    }

    #[test]
    fn always_home_scores_home_fraction() {
        let c = corpus();
        let run = evaluate_offline(&c, &ConstantAgent(Action::Home), &HarnessConfig::default()).unwrap();
        let homes = c.episodes.iter().flat_map(|e| &e.steps).filter(|s| s.action == Action::Home).count();
        assert_eq!(ams(&run.records).unwrap(), homes as f64 / c.total_steps() as f64);
    }

    #[test]
    fn records_independent_of_jobs() {
        let c = corpus();
        let agent = PerturbedAgent::new(&c, 0.3, 9).unwrap();
        let one = evaluate_offline(&c, &agent, &HarnessConfig::default()).unwrap();
        let four = evaluate_offline(
            &c,
            &agent,
            &HarnessConfig {
                jobs: 4,
                ..HarnessConfig::default()
            },
        )
        .unwrap();
        assert_eq!(one, four);
    }

    struct Flaky {
        fail_on: (String, u32),
        calls: AtomicUsize,
        recover_after: usize,
        inner: OracleAgent,
    }

    impl Agent for Flaky {
        fn act(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
            if (req.episode_id.clone(), req.step) == self.fail_on {
                let n = self.calls.fetch_add(1, Ordering::SeqCst);
                if n < self.recover_after {
                    return Err(AgentError::Transport("connection reset".into()));
                }
            }
            self.inner.act(req)
        }
    }

    #[test]
    fn transport_retry_then_abort() {
        let c = corpus();
        let target = (c.episodes[2].episode_id.clone(), 2);
        let agent = Flaky {
            fail_on: target.clone(),
            calls: AtomicUsize::new(0),
            recover_after: 2,
            inner: OracleAgent::new(&c),
        };
        let run = evaluate_offline(&c, &agent, &HarnessConfig::default()).unwrap();
        assert_eq!(run.failures.retried, 2);

        let agent = Flaky {
            fail_on: target,
            calls: AtomicUsize::new(0),
            recover_after: usize::MAX,
            inner: OracleAgent::new(&c),
        };
        let abort = evaluate_offline(&c, &agent, &HarnessConfig::default()).unwrap_err();
        let expected = c.episodes[0].len() + c.episodes[1].len() + 1;
        assert_eq!(abort.partial.len(), expected);
        assert!(matches!(abort.error, HarnessError::Agent { step: 2, .. }));
    }

    struct Garbage;

    impl Agent for Garbage {
        fn act(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
            if req.step.is_multiple_of(2) {
                Err(AgentError::Timeout)
            } else {
                wire::decode_response("CLICK somewhere")
            }
        }
    }

    #[test]
    fn malformed_and_timeouts_are_misses() {
        let c = corpus();
        let run = evaluate_offline(&c, &Garbage, &HarnessConfig::default()).unwrap();
        assert_eq!(run.records.len(), c.total_steps());
        assert!(run.records.iter().all(|r| r.outcome.reason == MatchReason::TypeMismatch));
        assert_eq!(run.failures.timeouts + run.failures.malformed, c.total_steps());
    }

    #[test]
    fn inline_images() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GenSpec::new(2, 1);
        let c = generate_corpus(&spec).unwrap();
        crate::synth::write_synthetic(&c, &spec.catalog(), dir.path()).unwrap();
        let c = Corpus::load_dir(dir.path()).unwrap();
        let config = HarnessConfig {
            images: ImageMode::Inline,
            ..HarnessConfig::default()
        };
        let req = request_for(&c.episodes[0], 2, &config, c.root.as_deref()).unwrap();
        assert_eq!(req.screenshot, ImageRef::B64(String::new()));
        let run = evaluate_offline(&c, &WireLoopback(OracleAgent::new(&c)), &config).unwrap();
        assert!(run.records.iter().all(|r| r.outcome.matched));
    }

    #[test]
    fn specs() {
        let c = corpus();
        let config = HarnessConfig::default();
        assert!(agent_from_spec("builtin:oracle", &c, &config).is_ok());
        assert!(agent_from_spec("builtin:perturbed:0.2:7", &c, &config).is_ok());
        assert!(agent_from_spec("builtin:perturbed:x", &c, &config).is_err());
        assert!(agent_from_spec("builtin:nope", &c, &config).is_err());
    }
}
