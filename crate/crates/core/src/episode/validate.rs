use std::fmt;
use std::path::Path;

use super::{Action, ActionKind, Episode, Point};

/// Structural rule an episode can break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    EmptyEpisodeId,
    DeviceResolution,
    EmptyApps,
    EmptyInstruction,
    StepLength,
    StepIndex,
    EmptySteps,
    TerminalAction,
    EarlyTerminal,
    PointOutOfRange,
    ScrollDegenerate,
    BboxNotAllowed,
    BboxInverted,
    BboxOutOfRange,
    ImpossibleNotes,
    SemanticIncomplete,
    ScreenshotEmpty,
    ScreenshotMissing,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::EmptyEpisodeId => "empty-episode-id",
            Rule::DeviceResolution => "device-resolution",
            Rule::EmptyApps => "empty-apps",
            Rule::EmptyInstruction => "empty-instruction",
            Rule::StepLength => "step-length",
            Rule::StepIndex => "step-index",
            Rule::EmptySteps => "empty-steps",
            Rule::TerminalAction => "terminal-action",
            Rule::EarlyTerminal => "early-terminal",
            Rule::PointOutOfRange => "point-out-of-range",
            Rule::ScrollDegenerate => "scroll-degenerate",
            Rule::BboxNotAllowed => "bbox-not-allowed",
            Rule::BboxInverted => "bbox-inverted",
            Rule::BboxOutOfRange => "bbox-out-of-range",
            Rule::ImpossibleNotes => "impossible-notes",
            Rule::SemanticIncomplete => "semantic-incomplete",
            Rule::ScreenshotEmpty => "screenshot-empty",
            Rule::ScreenshotMissing => "screenshot-missing",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based step the violation concerns, `None` for episode-level rules.
    pub step: Option<u32>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(t) => write!(f, "step {t}: {} ({})", self.rule, self.detail),
            None => write!(f, "{} ({})", self.rule, self.detail),
        }
    }
}

/// Checks every episode invariant. When `screenshot_root` is given, each
/// step's screenshot reference must also resolve to an existing file under
/// it. Violations are returned as data; an empty list means the episode is
/// structurally sound.
pub fn validate_structure(episode: &Episode, screenshot_root: Option<&Path>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |step: Option<u32>, rule: Rule, detail: String| {
        out.push(Violation { step, rule, detail })
    };

    if episode.episode_id.trim().is_empty() {
        push(None, Rule::EmptyEpisodeId, "episode_id is blank".into());
    }
    let device = &episode.device_info;
    if device.width == 0 || device.height == 0 {
        push(
            None,
            Rule::DeviceResolution,
            format!("{}x{}", device.width, device.height),
        );
    }
    let task = &episode.task_info;
    if task.apps.is_empty() || task.apps.iter().any(|a| a.trim().is_empty()) {
        push(None, Rule::EmptyApps, format!("apps = {:?}", task.apps));
    }
    if task.high_level_instruction.trim().is_empty() {
        push(None, Rule::EmptyInstruction, "high_level_instruction is blank".into());
    }
    if episode.step_length as usize != episode.steps.len() {
        push(
            None,
            Rule::StepLength,
            format!("step_length {} vs {} steps", episode.step_length, episode.steps.len()),
        );
    }
    if episode.steps.is_empty() {
        push(None, Rule::EmptySteps, "episode has no steps".into());
    }

    let last = episode.steps.len();
    for (i, step) in episode.steps.iter().enumerate() {
        let t = i as u32 + 1;
        let at = Some(t);
        if step.index != t {
            push(at, Rule::StepIndex, format!("index {} at position {t}", step.index));
        }
        let kind = step.action.kind();
        if i + 1 == last && !kind.is_terminal() {
            push(at, Rule::TerminalAction, format!("episode ends with {kind}"));
        }
        if i + 1 < last && kind.is_terminal() {
            push(at, Rule::EarlyTerminal, format!("{kind} before the final step"));
        }
        let oob: Vec<Point> = step
            .action
            .points()
            .into_iter()
            .filter(|p| !p.within(device))
            .collect();
        if !oob.is_empty() {
            push(at, Rule::PointOutOfRange, format!("{oob:?}"));
        }
        if let Action::Scroll { pos1, pos2 } = &step.action {
            if pos1 == pos2 {
                push(at, Rule::ScrollDegenerate, format!("pos1 = pos2 = {pos1}"));
            }
        }
        if let Some(bbox) = &step.bbox {
            if !kind.is_positional() {
                push(at, Rule::BboxNotAllowed, format!("bbox on a {kind} step"));
            }
            if bbox.min.x > bbox.max.x || bbox.min.y > bbox.max.y {
                push(at, Rule::BboxInverted, format!("{} > {}", bbox.min, bbox.max));
            }
            if !bbox.min.within(device) || !bbox.max.within(device) {
                push(at, Rule::BboxOutOfRange, format!("{}..{}", bbox.min, bbox.max));
            }
        }
        if kind == ActionKind::Impossible
            && step.notes.as_deref().is_none_or(|n| n.trim().is_empty())
        {
            push(at, Rule::ImpossibleNotes, "IMPOSSIBLE without a reason".into());
        }
        if let Some(sem) = &step.semantic {
            let parts = [
                &sem.screen_description,
                &sem.contextual_info,
                &sem.decision_rationale,
            ];
            if parts.iter().any(|p| p.trim().is_empty()) {
                push(at, Rule::SemanticIncomplete, "annotation has a blank part".into());
            }
        }
        if step.screenshot.trim().is_empty() {
            push(at, Rule::ScreenshotEmpty, "no screenshot reference".into());
        } else if let Some(root) = screenshot_root {
            if !root.join(&step.screenshot).is_file() {
                push(at, Rule::ScreenshotMissing, step.screenshot.clone());
            }
        }
    }
    out
}
