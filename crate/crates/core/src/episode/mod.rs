//! Episode data model.
//!
//! An episode is one recorded navigation trace: the device it was recorded
//! on, the task it accomplishes, and the ordered steps (screenshot reference
//! plus the action taken on that screen). Coordinates are stored in raw
//! pixels next to the device resolution; anything that needs screen-relative
//! geometry normalizes on the fly with [`normalize_point`].

mod action;
mod corpus;
mod format;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use action::{Action, ActionKind, ActionTextError};
pub use corpus::{Corpus, CorpusError, ManifestEntry, MANIFEST_FILE};
pub use format::{parse_episode, ActionArgs, serialize_episode, ParseError, SerializeError};
pub use validate::{validate_structure, Rule, Violation};

/// Opaque key-value map for fields this crate does not interpret.
pub type Extra = BTreeMap<String, Value>;

/// A pixel position on the device screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    /// True when the point lies on the `width` x `height` screen.
    pub fn within(&self, device: &DeviceInfo) -> bool {
        self.x < device.width && self.y < device.height
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// A point in screen-relative coordinates, each axis in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("point {point} is outside the {width}x{height} screen")]
pub struct RangeError {
    pub point: Point,
    pub width: u32,
    pub height: u32,
}

/// Divides each axis by its own screen dimension.
pub fn normalize_point(p: Point, device: &DeviceInfo) -> Result<UnitPoint, RangeError> {
    if !p.within(device) {
        return Err(RangeError {
            point: p,
            width: device.width,
            height: device.height,
        });
    }
    Ok(UnitPoint {
        x: f64::from(p.x) / f64::from(device.width),
        y: f64::from(p.y) / f64::from(device.height),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceInfo {
    pub name: String,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub extra: Extra,
}

impl DeviceInfo {
    pub fn new(name: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            name: name.into(),
            width,
            height,
            extra: Extra::new(),
        }
    }
}

/// The six cross-app task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskCategory {
    GeneralTool,
    InformationManagement,
    WebShopping,
    MediaEntertainment,
    SocialSharing,
    MultiApps,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 6] = [
        TaskCategory::GeneralTool,
        TaskCategory::InformationManagement,
        TaskCategory::WebShopping,
        TaskCategory::MediaEntertainment,
        TaskCategory::SocialSharing,
        TaskCategory::MultiApps,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskCategory::GeneralTool => "GeneralTool",
            TaskCategory::InformationManagement => "InformationManagement",
            TaskCategory::WebShopping => "WebShopping",
            TaskCategory::MediaEntertainment => "MediaEntertainment",
            TaskCategory::SocialSharing => "SocialSharing",
            TaskCategory::MultiApps => "MultiApps",
        }
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub category: TaskCategory,
    pub apps: Vec<String>,
    pub high_level_instruction: String,
    pub template_id: String,
    #[serde(flatten)]
    pub extra: Extra,
}

/// Precomputed segmentation box of the UI element a positional action
/// targets. Both corners are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub const fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    /// Boundary-inclusive containment.
    pub fn contains(&self, p: Point) -> bool {
        self.min.x <= p.x && p.x <= self.max.x && self.min.y <= p.y && p.y <= self.max.y
    }
}

/// Per-step reasoning annotation. The three parts exist together or not at
/// all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticAnnotation {
    pub screen_description: String,
    pub contextual_info: String,
    pub decision_rationale: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    /// 1-based position in the episode.
    pub index: u32,
    /// Screenshot file reference, relative to the corpus root.
    pub screenshot: String,
    pub action: Action,
    pub low_level_instruction: Option<String>,
    pub semantic: Option<SemanticAnnotation>,
    pub bbox: Option<BoundingBox>,
    /// Impossible-reason, scroll trajectory, annotator notes.
    pub notes: Option<String>,
}

impl Step {
    pub fn new(index: u32, screenshot: impl Into<String>, action: Action) -> Self {
        Self {
            index,
            screenshot: screenshot.into(),
            action,
            low_level_instruction: None,
            semantic: None,
            bbox: None,
            notes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub episode_id: String,
    pub device_info: DeviceInfo,
    pub task_info: TaskInfo,
    pub step_length: u32,
    pub steps: Vec<Step>,
}

impl Episode {
    /// Step `t` (1-based).
    pub fn step(&self, t: u32) -> Option<&Step> {
        if t == 0 {
            return None;
        }
        self.steps.get(t as usize - 1)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}
