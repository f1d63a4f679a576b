//! The on-disk episode document: one UTF-8 JSON object per episode with the
//! top-level keys `episode_id`, `device_info`, `task_info`, `step_length` and
//! `steps`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{
    validate_structure, Action, ActionKind, BoundingBox, DeviceInfo, Episode, Point,
    SemanticAnnotation, Step, TaskInfo, Violation,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed document at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
}

impl ParseError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("episode violates {} invariant(s): {}", .0.len(), list(.0))]
pub struct SerializeError(pub Vec<Violation>);

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeDoc {
    episode_id: String,
    device_info: DeviceInfo,
    task_info: TaskInfo,
    step_length: u32,
    steps: Vec<StepDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    screenshot: String,
    action: ActionKind,
    #[serde(default)]
    action_args: Option<ActionArgs>,
    #[serde(default)]
    low_level_instruction: Option<String>,
    #[serde(default)]
    semantic: Option<SemanticAnnotation>,
    #[serde(default)]
    bbox: Option<BoundingBox>,
    #[serde(default)]
    notes: Option<String>,
}

/// Per-kind action arguments as they appear in documents and on the wire.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionArgs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos1: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos2: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl ActionArgs {
    /// Arguments of `action`, `None` for argument-free kinds.
    pub fn of(action: &Action) -> Option<ActionArgs> {
        args_to_doc(action)
    }

    /// Builds an action of `kind`, checking that exactly the arguments the
    /// kind needs are present. `path` prefixes field paths in errors.
    pub fn into_action(args: Option<ActionArgs>, kind: ActionKind, path: &str) -> Result<Action, ParseError> {
        action_from_doc(kind, args, path)
    }
}

/// Byte offset of a 1-based (line, column) position reported by serde_json.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = bytes
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == b'\n')
        .nth(line.saturating_sub(2))
        .map(|(i, _)| i + 1)
        .filter(|_| line > 1)
        .unwrap_or(0);
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

fn action_from_doc(kind: ActionKind, args: Option<ActionArgs>, path: &str) -> Result<Action, ParseError> {
    let args = args.unwrap_or_default();
    let need = |p: Option<Point>, name: &str| {
        p.ok_or_else(|| ParseError::schema(format!("{path}.{name}"), format!("required for {kind}")))
    };
    let forbid = |present: bool, name: &str| {
        if present {
            Err(ParseError::schema(
                format!("{path}.{name}"),
                format!("not an argument of {kind}"),
            ))
        } else {
            Ok(())
        }
    };
    match kind {
        ActionKind::Click | ActionKind::LongPress => {
            forbid(args.pos2.is_some(), "pos2")?;
            forbid(args.text.is_some(), "text")?;
            let pos1 = need(args.pos1, "pos1")?;
            Ok(if kind == ActionKind::Click {
                Action::Click { pos1 }
            } else {
                Action::LongPress { pos1 }
            })
        }
        ActionKind::Scroll => {
            forbid(args.text.is_some(), "text")?;
            Ok(Action::Scroll {
                pos1: need(args.pos1, "pos1")?,
                pos2: need(args.pos2, "pos2")?,
            })
        }
        ActionKind::Type => {
            forbid(args.pos1.is_some(), "pos1")?;
            forbid(args.pos2.is_some(), "pos2")?;
            let text = args
                .text
                .ok_or_else(|| ParseError::schema(format!("{path}.text"), "required for TYPE"))?;
            Ok(Action::Type { text })
        }
        bare => {
            forbid(args.pos1.is_some(), "pos1")?;
            forbid(args.pos2.is_some(), "pos2")?;
            forbid(args.text.is_some(), "text")?;
            Ok(Action::bare(bare).expect("argument-free kind"))
        }
    }
}

fn args_to_doc(action: &Action) -> Option<ActionArgs> {
    match action {
        Action::Click { pos1 } | Action::LongPress { pos1 } => Some(ActionArgs {
            pos1: Some(*pos1),
            ..ActionArgs::default()
        }),
        Action::Scroll { pos1, pos2 } => Some(ActionArgs {
            pos1: Some(*pos1),
            pos2: Some(*pos2),
            text: None,
        }),
        Action::Type { text } => Some(ActionArgs {
            text: Some(text.clone()),
            ..ActionArgs::default()
        }),
        _ => None,
    }
}

/// Parses one episode document.
///
/// Structural checks that need the whole episode (terminal action, point
/// ranges, ...) are left to [`validate_structure`] so that partially recorded
/// episodes can still be loaded; only `step_length` and per-kind argument
/// presence are enforced here.
pub fn parse_episode(bytes: &[u8]) -> Result<Episode, ParseError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ParseError::Syntax {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let doc: EpisodeDoc = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ParseError::schema(path, e.into_inner().to_string())
    })?;

    if doc.step_length as usize != doc.steps.len() {
        return Err(ParseError::schema(
            "step_length",
            format!(
                "declares {} steps but the document has {}",
                doc.step_length,
                doc.steps.len()
            ),
        ));
    }

    let mut steps = Vec::with_capacity(doc.steps.len());
    for (i, s) in doc.steps.into_iter().enumerate() {
        let at = format!("steps[{i}]");
        let action = action_from_doc(s.action, s.action_args, &format!("{at}.action_args"))?;
        steps.push(Step {
            index: i as u32 + 1,
            screenshot: s.screenshot,
            action,
            low_level_instruction: s.low_level_instruction,
            semantic: s.semantic,
            bbox: s.bbox,
            notes: s.notes,
        });
    }

    Ok(Episode {
        episode_id: doc.episode_id,
        device_info: doc.device_info,
        task_info: doc.task_info,
        step_length: doc.step_length,
        steps,
    })
}

/// Emits the canonical document (pretty-printed, sorted extra keys, every
/// step key present, trailing newline). Refuses episodes that break any
/// structural invariant.
pub fn serialize_episode(episode: &Episode) -> Result<Vec<u8>, SerializeError> {
    let violations = validate_structure(episode, None);
    if !violations.is_empty() {
        return Err(SerializeError(violations));
    }
    let doc = EpisodeDoc {
        episode_id: episode.episode_id.clone(),
        device_info: episode.device_info.clone(),
        task_info: episode.task_info.clone(),
        step_length: episode.step_length,
        steps: episode
            .steps
            .iter()
            .map(|s| StepDoc {
                screenshot: s.screenshot.clone(),
                action: s.action.kind(),
                action_args: args_to_doc(&s.action),
                low_level_instruction: s.low_level_instruction.clone(),
                semantic: s.semantic.clone(),
                bbox: s.bbox,
                notes: s.notes.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("episode documents always serialize");
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "episode_id": "ep-1",
        "device_info": {"name": "Medium Phone", "width": 1080, "height": 2400},
        "task_info": {
            "category": "GeneralTool",
            "apps": ["Settings", "Chrome"],
            "high_level_instruction": "Turn on dark mode then search for it",
            "template_id": "T001"
        },
        "step_length": 1,
        "steps": [
            {"screenshot": "shots/ep-1/1.png", "action": "COMPLETE", "action_args": null,
             "low_level_instruction": null, "semantic": null, "bbox": null, "notes": null}
        ]
    }"#;

    #[test]
    fn minimal_complete_episode() {
        let ep = parse_episode(MINIMAL.as_bytes()).unwrap();
        assert_eq!(ep.step_length, 1);
        assert_eq!(ep.steps.len(), 1);
        assert_eq!(ep.steps[0].action, Action::Complete);
        assert_eq!(ep.steps[0].index, 1);
    }

    #[test]
    fn step_length_mismatch_names_the_field() {
        let doc = MINIMAL.replace("\"step_length\": 1", "\"step_length\": 3");
        match parse_episode(doc.as_bytes()) {
            Err(ParseError::Schema { path, .. }) => assert_eq!(path, "step_length"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_byte_offset() {
        let doc = b"{\n  \"episode_id\": \"x\",\n  oops\n}";
        match parse_episode(doc) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(&doc[offset..offset + 4], b"oops"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_arguments_are_schema_errors() {
        let doc = MINIMAL.replace(
            "\"action\": \"COMPLETE\", \"action_args\": null",
            "\"action\": \"CLICK\", \"action_args\": {}",
        );
        match parse_episode(doc.as_bytes()) {
            Err(ParseError::Schema { path, .. }) => assert_eq!(path, "steps[0].action_args.pos1"),
            other => panic!("unexpected {other:?}"),
        }
        let doc = MINIMAL.replace(
            "\"action_args\": null",
            "\"action_args\": {\"text\": \"x\"}",
        );
        assert!(matches!(
            parse_episode(doc.as_bytes()),
            Err(ParseError::Schema { .. })
        ));
    }

    #[test]
    fn nested_type_error_carries_path() {
        let doc = MINIMAL.replace("\"width\": 1080", "\"width\": -4");
        match parse_episode(doc.as_bytes()) {
            Err(ParseError::Schema { path, .. }) => assert_eq!(path, "device_info.width"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_top_level_key_is_rejected() {
        let doc = MINIMAL.replacen("{", "{\"bogus\": 1,", 1);
        assert!(matches!(
            parse_episode(doc.as_bytes()),
            Err(ParseError::Schema { .. })
        ));
    }

    #[test]
    fn extras_survive_round_trip() {
        let doc = MINIMAL.replace(
            "\"height\": 2400",
            "\"height\": 2400, \"api_level\": 34, \"abi\": \"x86_64\"",
        );
        let ep = parse_episode(doc.as_bytes()).unwrap();
        assert_eq!(ep.device_info.extra["api_level"], 34);
        let bytes = serialize_episode(&ep).unwrap();
        assert_eq!(parse_episode(&bytes).unwrap(), ep);
        assert_eq!(serialize_episode(&ep).unwrap(), bytes);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\"step_length\": 1"));
    }

    #[test]
    fn spaced_spelling_of_long_press_is_accepted() {
        let doc = MINIMAL
            .replace("\"step_length\": 1", "\"step_length\": 2")
            .replace(
                "\"steps\": [",
                "\"steps\": [{\"screenshot\": \"a.png\", \"action\": \"LONG PRESS\", \"action_args\": {\"pos1\": {\"x\": 3, \"y\": 4}}},",
            );
        let ep = parse_episode(doc.as_bytes()).unwrap();
        assert_eq!(ep.steps[0].action, Action::LongPress { pos1: Point::new(3, 4) });
    }

    #[test]
    fn serialize_refuses_invalid_episode() {
        let mut ep = parse_episode(MINIMAL.as_bytes()).unwrap();
        ep.steps[0].action = Action::Home;
        let err = serialize_episode(&ep).unwrap_err();
        assert!(err.0.iter().any(|v| v.rule.as_str() == "terminal-action"));
    }
}
