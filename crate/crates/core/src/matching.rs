//! Per-step action matching.
//!
//! A predicted action matches the gold one when the kinds agree and:
//!
//! - CLICK / LONG_PRESS: the screen-normalized Euclidean distance to the gold
//!   point is at most [`DISTANCE_THRESHOLD`], or the prediction falls inside
//!   the gold element's bounding box (edges included);
//! - SCROLL: both gestures move the finger in the same [`Direction`];
//! - TYPE: [`anls`] of the two texts is at least [`ANLS_THRESHOLD`];
//! - every other kind: the kind alone decides.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{normalize_point, Action, BoundingBox, DeviceInfo, Point, RangeError};

/// Largest normalized distance that still counts as a hit (inclusive).
pub const DISTANCE_THRESHOLD: f64 = 0.14;
/// Smallest text similarity that still counts as a hit (inclusive).
pub const ANLS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("degenerate gesture: pos1 = pos2 = {0}")]
pub struct DegenerateGesture(pub Point);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchReason {
    TypeMismatch,
    DistanceExceeded,
    OutsideBboxAndDistance,
    DirectionMismatch,
    AnlsBelowThreshold,
    OkType,
    OkDistance,
    OkBbox,
    OkDirection,
    OkAnls,
}

impl MatchReason {
    pub fn is_ok(&self) -> bool {
        matches!(
            self,
            MatchReason::OkType
                | MatchReason::OkDistance
                | MatchReason::OkBbox
                | MatchReason::OkDirection
                | MatchReason::OkAnls
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MatchReason::TypeMismatch => "type-mismatch",
            MatchReason::DistanceExceeded => "distance-exceeded",
            MatchReason::OutsideBboxAndDistance => "outside-bbox-and-distance",
            MatchReason::DirectionMismatch => "direction-mismatch",
            MatchReason::AnlsBelowThreshold => "anls-below-threshold",
            MatchReason::OkType => "ok-type",
            MatchReason::OkDistance => "ok-distance",
            MatchReason::OkBbox => "ok-bbox",
            MatchReason::OkDirection => "ok-direction",
            MatchReason::OkAnls => "ok-anls",
        }
    }
}

impl fmt::Display for MatchReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-step verdict. `matched` is always `reason.is_ok()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub matched: bool,
    pub reason: MatchReason,
}

impl From<MatchReason> for MatchOutcome {
    fn from(reason: MatchReason) -> Self {
        Self {
            matched: reason.is_ok(),
            reason,
        }
    }
}

/// Euclidean distance between the two points after dividing each axis by
/// its own screen dimension.
pub fn normalized_distance(pred: Point, gold: Point, device: &DeviceInfo) -> Result<f64, RangeError> {
    normalize_point(pred, device)?;
    normalize_point(gold, device)?;
    // integer deltas first so an exact boundary such as 336/2400 lands on 0.14
    let dx = (f64::from(pred.x) - f64::from(gold.x)) / f64::from(device.width);
    let dy = (f64::from(pred.y) - f64::from(gold.y)) / f64::from(device.height);
    Ok(dx.hypot(dy))
}

pub fn match_positional(
    pred: Point,
    gold: Point,
    device: &DeviceInfo,
    bbox: Option<&BoundingBox>,
) -> Result<MatchOutcome, RangeError> {
    let d = normalized_distance(pred, gold, device)?;
    let reason = if d <= DISTANCE_THRESHOLD {
        MatchReason::OkDistance
    } else if let Some(b) = bbox {
        if b.contains(pred) {
            MatchReason::OkBbox
        } else {
            MatchReason::OutsideBboxAndDistance
        }
    } else {
        MatchReason::DistanceExceeded
    };
    Ok(reason.into())
}

/// Direction the finger moves from `pos1` to `pos2`. The dominant axis
/// wins; equal magnitudes resolve vertically.
pub fn scroll_direction(pos1: Point, pos2: Point) -> Result<Direction, DegenerateGesture> {
    if pos1 == pos2 {
        return Err(DegenerateGesture(pos1));
    }
    let dx = i64::from(pos2.x) - i64::from(pos1.x);
    let dy = i64::from(pos2.y) - i64::from(pos1.y);
    Ok(if dy.abs() >= dx.abs() {
        if dy < 0 {
            Direction::Up
        } else {
            Direction::Down
        }
    } else if dx > 0 {
        Direction::Right
    } else {
        Direction::Left
    })
}

/// Edit distance over Unicode scalar values (insert, delete, substitute all
/// cost 1). Two-row dynamic programme.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized Levenshtein similarity, `1 - lev / max(|a|, |b|)`; 1.0 for two
/// empty strings. Case- and whitespace-sensitive.
pub fn anls(pred: &str, gold: &str) -> f64 {
    let longest = pred.chars().count().max(gold.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(pred, gold) as f64 / longest as f64
}

/// Scores one predicted action against the gold action of the same step.
///
/// Predicted points outside the screen are a misgrounded prediction, not a
/// harness fault: they score as `distance-exceeded`.
pub fn match_step(
    pred: &Action,
    gold: &Action,
    device: &DeviceInfo,
    bbox: Option<&BoundingBox>,
) -> MatchOutcome {
    if pred.kind() != gold.kind() {
        return MatchReason::TypeMismatch.into();
    }
    if pred.points().iter().any(|p| !p.within(device)) {
        return MatchReason::DistanceExceeded.into();
    }
    match (pred, gold) {
        (Action::Click { pos1: p }, Action::Click { pos1: g })
        | (Action::LongPress { pos1: p }, Action::LongPress { pos1: g }) => {
            match_positional(*p, *g, device, bbox).unwrap_or(MatchReason::DistanceExceeded.into())
        }
        (Action::Scroll { pos1: p1, pos2: p2 }, Action::Scroll { pos1: g1, pos2: g2 }) => {
            match (scroll_direction(*p1, *p2), scroll_direction(*g1, *g2)) {
                (Ok(p), Ok(g)) if p == g => MatchReason::OkDirection.into(),
                _ => MatchReason::DirectionMismatch.into(),
            }
        }
        (Action::Type { text: p }, Action::Type { text: g }) => {
            if anls(p, g) >= ANLS_THRESHOLD {
                MatchReason::OkAnls.into()
            } else {
                MatchReason::AnlsBelowThreshold.into()
            }
        }
        _ => MatchReason::OkType.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phone() -> DeviceInfo {
        DeviceInfo::new("Medium Phone", 1080, 2400)
    }

    #[test]
    fn distance_examples() {
        let d = phone();
        assert_eq!(normalized_distance(Point::new(5, 5), Point::new(5, 5), &d).unwrap(), 0.0);
        let h = normalized_distance(Point::new(700, 1200), Point::new(540, 1200), &d).unwrap();
        assert!((h - 160.0 / 1080.0).abs() < 1e-12);
        assert!((h - 0.14815).abs() < 1e-5);
        let v = normalized_distance(Point::new(540, 1536), Point::new(540, 1200), &d).unwrap();
        assert_eq!(v, 336.0 / 2400.0);
        assert!((v - 0.14).abs() < 1e-15);
    }

    #[test]
    fn positional_examples() {
        let d = phone();
        let ok = match_positional(Point::new(690, 1200), Point::new(540, 1200), &d, None).unwrap();
        assert_eq!(ok.reason, MatchReason::OkDistance);
        let b = BoundingBox::new(Point::new(600, 1100), Point::new(900, 1400));
        let via_box = match_positional(Point::new(850, 1350), Point::new(540, 1200), &d, Some(&b)).unwrap();
        assert_eq!(via_box, MatchReason::OkBbox.into());
        let far = normalized_distance(Point::new(850, 1350), Point::new(540, 1200), &d).unwrap();
        // both axes contribute: the x term alone is 310/1080 = 0.287
        let expected = ((310.0f64 / 1080.0).powi(2) + (150.0f64 / 2400.0).powi(2)).sqrt();
        assert!((far - expected).abs() < 1e-12 && far > 0.287);
        let miss = match_positional(Point::new(700, 1200), Point::new(540, 1200), &d, None).unwrap();
        assert_eq!(miss, MatchReason::DistanceExceeded.into());
        let outside = match_positional(Point::new(100, 100), Point::new(540, 1200), &d, Some(&b)).unwrap();
        assert_eq!(outside.reason, MatchReason::OutsideBboxAndDistance);
    }

    #[test]
    fn exact_threshold_is_inclusive() {
        // 336 / 2400 is exactly the 0.14 boundary on the vertical axis
        let d = phone();
        let r = match_positional(Point::new(540, 1536), Point::new(540, 1200), &d, None).unwrap();
        assert!(r.matched);
        let r = match_positional(Point::new(540, 1537), Point::new(540, 1200), &d, None).unwrap();
        assert!(!r.matched);
    }

    #[test]
    fn scroll_examples() {
        assert_eq!(
            scroll_direction(Point::new(540, 1800), Point::new(540, 600)).unwrap(),
            Direction::Up
        );
        assert_eq!(
            scroll_direction(Point::new(200, 1200), Point::new(900, 1200)).unwrap(),
            Direction::Right
        );
        assert_eq!(
            scroll_direction(Point::new(100, 100), Point::new(200, 200)).unwrap(),
            Direction::Down
        );
        assert_eq!(
            scroll_direction(Point::new(900, 100), Point::new(100, 110)).unwrap(),
            Direction::Left
        );
        assert!(scroll_direction(Point::new(1, 1), Point::new(1, 1)).is_err());
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("abc", "abc"), 0);
        // code points, not bytes
        assert_eq!(levenshtein("café", "cafe"), 1);
    }

    #[test]
    fn anls_examples() {
        assert_eq!(anls("", ""), 1.0);
        assert!((anls("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        assert_eq!(anls("a", "b"), 0.0);
        assert_eq!(anls("Yoga", "yoga"), 0.75);
    }

    #[test]
    fn step_examples() {
        let d = phone();
        assert_eq!(match_step(&Action::Home, &Action::Home, &d, None), MatchReason::OkType.into());
        let typed = match_step(
            &Action::Type { text: "yoga for beginers".into() },
            &Action::Type { text: "yoga for beginners".into() },
            &d,
            None,
        );
        assert_eq!(typed, MatchReason::OkAnls.into());
        let up = Action::Scroll { pos1: Point::new(540, 1800), pos2: Point::new(540, 600) };
        let down = Action::Scroll { pos1: Point::new(540, 600), pos2: Point::new(540, 1800) };
        assert_eq!(match_step(&up, &down, &d, None), MatchReason::DirectionMismatch.into());
        assert_eq!(match_step(&Action::Back, &Action::Home, &d, None), MatchReason::TypeMismatch.into());
    }

    #[test]
    fn anls_boundary() {
        let d = phone();
        // lev 1 over max length 2 is exactly 0.5
        assert_eq!(anls("ab", "ax"), 0.5);
        let r = match_step(&Action::Type { text: "ab".into() }, &Action::Type { text: "ax".into() }, &d, None);
        assert!(r.matched);
    }

    #[test]
    fn out_of_screen_prediction_is_a_miss() {
        let d = phone();
        let r = match_step(
            &Action::Click { pos1: Point::new(5000, 10) },
            &Action::Click { pos1: Point::new(10, 10) },
            &d,
            None,
        );
        assert_eq!(r, MatchReason::DistanceExceeded.into());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn naive(a: &[char], b: &[char]) -> usize {
            // full-table oracle
            let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
            for (i, row) in t.iter_mut().enumerate() {
                row[0] = i;
            }
            for j in 0..=b.len() {
                t[0][j] = j;
            }
            for i in 1..=a.len() {
                for j in 1..=b.len() {
                    let c = usize::from(a[i - 1] != b[j - 1]);
                    t[i][j] = (t[i - 1][j] + 1).min(t[i][j - 1] + 1).min(t[i - 1][j - 1] + c);
                }
            }
            t[a.len()][b.len()]
        }

        fn short() -> impl Strategy<Value = String> {
            proptest::string::string_regex("[abcé ]{0,12}").unwrap()
        }

        proptest! {
            #[test]
            fn levenshtein_matches_table(a in short(), b in short()) {
                let ac: Vec<char> = a.chars().collect();
                let bc: Vec<char> = b.chars().collect();
                prop_assert_eq!(levenshtein(&a, &b), naive(&ac, &bc));
                prop_assert!(levenshtein(&a, &b) <= ac.len().max(bc.len()));
            }

            #[test]
            fn levenshtein_triangle(a in short(), b in short(), c in short()) {
                prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
            }

            #[test]
            fn anls_is_symmetric_and_bounded(a in any::<String>(), b in any::<String>()) {
                let s = anls(&a, &b);
                prop_assert_eq!(s, anls(&b, &a));
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert_eq!(anls(&a, &a), 1.0);
            }

            #[test]
            fn direction_is_translation_invariant(
                x1 in 0u32..1000, y1 in 0u32..1000, x2 in 0u32..1000, y2 in 0u32..1000,
                tx in 0u32..1000, ty in 0u32..1000,
            ) {
                let (a, b) = (Point::new(x1, y1), Point::new(x2, y2));
                let moved = (Point::new(x1 + tx, y1 + ty), Point::new(x2 + tx, y2 + ty));
                prop_assert_eq!(scroll_direction(a, b), scroll_direction(moved.0, moved.1).map_err(|_| DegenerateGesture(a)));
            }

            #[test]
            fn click_on_gold_always_matches(x in 0u32..1080, y in 0u32..2400) {
                let a = Action::Click { pos1: Point::new(x, y) };
                let o = match_step(&a, &a, &phone(), None);
                prop_assert!(o.matched);
                prop_assert_eq!(o.matched, o.reason.is_ok());
            }
        }
    }
}
