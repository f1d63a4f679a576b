use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Point;

/// The nine action kinds of the recording system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    Click,
    #[serde(alias = "LONG PRESS")]
    LongPress,
    Scroll,
    Type,
    Complete,
    Impossible,
    Home,
    Back,
    Recent,
}

impl ActionKind {
    pub const ALL: [ActionKind; 9] = [
        ActionKind::Click,
        ActionKind::LongPress,
        ActionKind::Scroll,
        ActionKind::Type,
        ActionKind::Complete,
        ActionKind::Impossible,
        ActionKind::Home,
        ActionKind::Back,
        ActionKind::Recent,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::Click => "CLICK",
            ActionKind::LongPress => "LONG_PRESS",
            ActionKind::Scroll => "SCROLL",
            ActionKind::Type => "TYPE",
            ActionKind::Complete => "COMPLETE",
            ActionKind::Impossible => "IMPOSSIBLE",
            ActionKind::Home => "HOME",
            ActionKind::Back => "BACK",
            ActionKind::Recent => "RECENT",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, ActionKind::Complete | ActionKind::Impossible)
    }

    pub fn is_positional(&self) -> bool {
        matches!(self, ActionKind::Click | ActionKind::LongPress)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "LONG PRESS" => Some(ActionKind::LongPress),
            _ => ActionKind::ALL.into_iter().find(|k| k.as_str() == name),
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An action with exactly the arguments its kind requires.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    Click { pos1: Point },
    LongPress { pos1: Point },
    Scroll { pos1: Point, pos2: Point },
    Type { text: String },
    Complete,
    Impossible,
    Home,
    Back,
    Recent,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Click { .. } => ActionKind::Click,
            Action::LongPress { .. } => ActionKind::LongPress,
            Action::Scroll { .. } => ActionKind::Scroll,
            Action::Type { .. } => ActionKind::Type,
            Action::Complete => ActionKind::Complete,
            Action::Impossible => ActionKind::Impossible,
            Action::Home => ActionKind::Home,
            Action::Back => ActionKind::Back,
            Action::Recent => ActionKind::Recent,
        }
    }

    /// The argument-free action for a kind that takes no arguments.
    pub fn bare(kind: ActionKind) -> Option<Action> {
        match kind {
            ActionKind::Complete => Some(Action::Complete),
            ActionKind::Impossible => Some(Action::Impossible),
            ActionKind::Home => Some(Action::Home),
            ActionKind::Back => Some(Action::Back),
            ActionKind::Recent => Some(Action::Recent),
            _ => None,
        }
    }

    /// Every screen position the action carries.
    pub fn points(&self) -> Vec<Point> {
        match self {
            Action::Click { pos1 } | Action::LongPress { pos1 } => vec![*pos1],
            Action::Scroll { pos1, pos2 } => vec![*pos1, *pos2],
            _ => Vec::new(),
        }
    }
}

/// Canonical single-line text: `CLICK(540,1200)`, `SCROLL(540,1800)->(540,600)`,
/// `TYPE("yoga")`, bare kind otherwise.
impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Click { pos1 } | Action::LongPress { pos1 } => {
                write!(f, "{}{}", self.kind(), pos1)
            }
            Action::Scroll { pos1, pos2 } => write!(f, "SCROLL{pos1}->{pos2}"),
            Action::Type { text } => {
                let quoted = serde_json::to_string(text).map_err(|_| fmt::Error)?;
                write!(f, "TYPE({quoted})")
            }
            other => f.write_str(other.kind().as_str()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("not a canonical action: {0:?}")]
pub struct ActionTextError(pub String);

fn parse_point(s: &str) -> Option<(Point, &str)> {
    let s = s.strip_prefix('(')?;
    let close = s.find(')')?;
    let (x, y) = s[..close].split_once(',')?;
    let p = Point::new(x.trim().parse().ok()?, y.trim().parse().ok()?);
    Some((p, &s[close + 1..]))
}

impl FromStr for Action {
    type Err = ActionTextError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || ActionTextError(text.to_string());
        let s = text.trim();
        let name_end = s.find('(').unwrap_or(s.len());
        let kind = ActionKind::from_name(&s[..name_end]).ok_or_else(err)?;
        let rest = &s[name_end..];
        match kind {
            ActionKind::Click | ActionKind::LongPress => {
                let (pos1, tail) = parse_point(rest).ok_or_else(err)?;
                if !tail.is_empty() {
                    return Err(err());
                }
                Ok(if kind == ActionKind::Click {
                    Action::Click { pos1 }
                } else {
                    Action::LongPress { pos1 }
                })
            }
            ActionKind::Scroll => {
                let (pos1, tail) = parse_point(rest).ok_or_else(err)?;
                let tail = tail.strip_prefix("->").ok_or_else(err)?;
                let (pos2, tail) = parse_point(tail).ok_or_else(err)?;
                if !tail.is_empty() {
                    return Err(err());
                }
                Ok(Action::Scroll { pos1, pos2 })
            }
            ActionKind::Type => {
                let inner = rest
                    .strip_prefix('(')
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(err)?;
                let text: String = serde_json::from_str(inner).map_err(|_| err())?;
                Ok(Action::Type { text })
            }
            bare => {
                if !rest.is_empty() {
                    return Err(err());
                }
                Ok(Action::bare(bare).expect("argument-free kind"))
            }
        }
    }
}
