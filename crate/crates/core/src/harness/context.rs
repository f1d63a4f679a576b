//! Per-step agent requests assembled from gold (recorded) data only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{DeviceInfo, Episode};
use crate::metrics::InstructionLevel;

pub const PROTOCOL: &str = "odyssey-wire/1";

/// Default number of history screenshots.
pub const DEFAULT_DELTA: usize = 4;

/// A screenshot either by reference or inline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageRef {
    Path(String),
    B64(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceSummary {
    pub name: String,
    pub width: u32,
    pub height: u32,
}

impl From<&DeviceInfo> for DeviceSummary {
    fn from(d: &DeviceInfo) -> Self {
        Self {
            name: d.name.clone(),
            width: d.width,
            height: d.height,
        }
    }
}

/// What an agent sees at step `t`. Also the wire request object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRequest {
    pub protocol: String,
    pub episode_id: String,
    pub step: u32,
    pub instruction: String,
    pub instruction_level: InstructionLevel,
    pub device: DeviceSummary,
    pub screenshot: ImageRef,
    /// Prior screenshots, oldest first.
    pub history_screenshots: Vec<ImageRef>,
    /// Prior gold actions in canonical text, oldest first.
    pub history_actions: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("episode {episode_id}: step {t} outside 1..={len}")]
    StepOutOfRange { episode_id: String, t: u32, len: usize },
    #[error("episode {episode_id}: step {t} has no low-level instruction")]
    LevelUnavailable { episode_id: String, t: u32 },
}

/// Request for step `t` with the last `min(t-1, delta)` screenshots and
/// every prior action.
pub fn build_context(
    episode: &Episode,
    t: u32,
    level: InstructionLevel,
    delta: usize,
) -> Result<AgentRequest, ContextError> {
    build_context_windowed(episode, t, level, delta, None)
}

/// As [`build_context`], optionally keeping only the last `action_window`
/// history actions.
pub fn build_context_windowed(
    episode: &Episode,
    t: u32,
    level: InstructionLevel,
    delta: usize,
    action_window: Option<usize>,
) -> Result<AgentRequest, ContextError> {
    let step = episode.step(t).ok_or_else(|| ContextError::StepOutOfRange {
        episode_id: episode.episode_id.clone(),
        t,
        len: episode.len(),
    })?;
    let instruction = match level {
        InstructionLevel::High => episode.task_info.high_level_instruction.clone(),
        InstructionLevel::Low => step
            .low_level_instruction
            .clone()
            .ok_or_else(|| ContextError::LevelUnavailable {
                episode_id: episode.episode_id.clone(),
                t,
            })?,
    };
    let prior = &episode.steps[..t as usize - 1];
    let shots = &prior[prior.len().saturating_sub(delta)..];
    let actions = match action_window {
        Some(w) => &prior[prior.len().saturating_sub(w)..],
        None => prior,
    };
    Ok(AgentRequest {
        protocol: PROTOCOL.to_string(),
        episode_id: episode.episode_id.clone(),
        step: t,
        instruction,
        instruction_level: level,
        device: (&episode.device_info).into(),
        screenshot: ImageRef::Path(step.screenshot.clone()),
        history_screenshots: shots.iter().map(|s| ImageRef::Path(s.screenshot.clone())).collect(),
        history_actions: actions.iter().map(|s| s.action.to_string()).collect(),
    })
}
