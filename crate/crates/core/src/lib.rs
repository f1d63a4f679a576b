//! Offline evaluation harness and data toolkit for cross-app GUI navigation
//! agents.
//!
//! The crate is organized around the life of an episode:
//!
//! - [`episode`]: the episode/action data model, its JSON file format and
//!   structural validation.
//! - [`synth`]: seeded generation of synthetic, structurally valid corpora.
//! - [`matching`]: per-step action matching (distance, bounding box, scroll
//!   direction and text similarity rules).
//! - [`metrics`]: action matching score and success rate aggregation, reports.
//! - [`splits`]: the random / task / device / app train-test partitions.
//! - [`harness`]: teacher-forced offline evaluation of agents over the
//!   `odyssey-wire/1` protocol.
//! - [`resampler`]: a small double-precision cross-attention history
//!   resampler with gradient checks and token accounting.
//! - [`pipeline`]: instruction template expansion, LLM-backed step
//!   annotation and the data quality check.
//! - [`cli`]: the `odyssey` command line entry point.
//!
//! Runnable walkthroughs for each capability live in the crate's
//! `examples/` directory (`cargo run -p odyssey --example <name>`).

pub mod cli;
pub mod episode;
pub mod harness;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod resampler;
mod seed;
pub mod splits;
pub mod synth;

pub use episode::{
    Action, ActionKind, BoundingBox, Corpus, DeviceInfo, Episode, Point, SemanticAnnotation, Step,
    TaskCategory, TaskInfo,
};
pub use matching::{match_step, MatchOutcome, MatchReason};
pub use metrics::{EvalRecord, EvalReport, InstructionLevel};
