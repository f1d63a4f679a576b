//! Action matching score (AMS) and success rate (SR).
//!
//! AMS is the fraction of matched steps; SR is the fraction of episodes in
//! which every step matched. Scores are kept as exact counts and only turned
//! into reals when rendered. Grouped reports carry an `Overall` row that is
//! step-weighted for AMS and episode-weighted for SR unless
//! [`OverallWeighting::MeanOfGroups`] is requested.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::TaskCategory;
use crate::matching::MatchOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstructionLevel {
    #[serde(rename = "HL")]
    High,
    #[serde(rename = "LL")]
    Low,
}

impl InstructionLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            InstructionLevel::High => "HL",
            InstructionLevel::Low => "LL",
        }
    }
}

impl fmt::Display for InstructionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstructionLevel {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "HL" | "HIGH" => Ok(InstructionLevel::High),
            "LL" | "LOW" => Ok(InstructionLevel::Low),
            _ => Err(MetricsError::Config(format!("unknown instruction level {s:?}"))),
        }
    }
}

/// One scored step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub episode_id: String,
    pub step: u32,
    pub instruction_level: InstructionLevel,
    pub outcome: MatchOutcome,
    pub category: TaskCategory,
    pub device: String,
    /// Number of steps in the episode, so coverage can be checked.
    pub episode_steps: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    /// Canonical text of the gold action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    /// Canonical text of the prediction, or the agent's raw output when it
    /// could not be parsed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot score an empty group")]
    EmptyGroup,
    #[error("episode {episode_id} ({level}) is incomplete: {detail}")]
    IncompleteEpisode {
        episode_id: String,
        level: InstructionLevel,
        detail: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("report csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// `(matched, total)` counts; merging is commutative and associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub matched: u64,
    pub total: u64,
}

impl Tally {
    pub fn add(&mut self, matched: bool) {
        self.matched += u64::from(matched);
        self.total += 1;
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            matched: self.matched + other.matched,
            total: self.total + other.total,
        }
    }

    pub fn ratio(&self) -> Option<f64> {
        (self.total > 0).then(|| self.matched as f64 / self.total as f64)
    }
}

fn step_tally<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> Tally {
    let mut t = Tally::default();
    for r in records {
        t.add(r.outcome.matched);
    }
    t
}

/// Groups records by `(episode_id, level)` and checks that each unit covers
/// steps `1..=episode_steps` exactly once.
fn episode_tally<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> Result<Tally, MetricsError> {
    let mut units: BTreeMap<(&str, InstructionLevel), (u32, BTreeSet<u32>, bool)> = BTreeMap::new();
    for r in records {
        let key = (r.episode_id.as_str(), r.instruction_level);
        let unit = units
            .entry(key)
            .or_insert_with(|| (r.episode_steps, BTreeSet::new(), true));
        let incomplete = |detail: String| MetricsError::IncompleteEpisode {
            episode_id: r.episode_id.clone(),
            level: r.instruction_level,
            detail,
        };
        if unit.0 != r.episode_steps {
            return Err(incomplete("records disagree on the episode length".into()));
        }
        if r.step == 0 || r.step > r.episode_steps {
            return Err(incomplete(format!("step {} outside 1..={}", r.step, r.episode_steps)));
        }
        if !unit.1.insert(r.step) {
            return Err(incomplete(format!("step {} scored twice", r.step)));
        }
        unit.2 &= r.outcome.matched;
    }
    let mut t = Tally::default();
    for ((id, level), (len, seen, all_ok)) in units {
        if seen.len() as u32 != len {
            return Err(MetricsError::IncompleteEpisode {
                episode_id: id.to_string(),
                level,
                detail: format!("{} of {len} steps scored", seen.len()),
            });
        }
        t.add(all_ok);
    }
    Ok(t)
}

/// Matched steps over total steps.
pub fn ams(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    step_tally(records).ratio().ok_or(MetricsError::EmptyGroup)
}

/// Fully matched episodes over episodes. Every episode must be covered.
pub fn success_rate(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    episode_tally(records)?.ratio().ok_or(MetricsError::EmptyGroup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Category,
    Level,
    Device,
    Split,
}

impl GroupKey {
    pub fn as_str(&self) -> &'static str {
        match self {
            GroupKey::Category => "category",
            GroupKey::Level => "level",
            GroupKey::Device => "device",
            GroupKey::Split => "split",
        }
    }

    fn value(&self, r: &EvalRecord) -> String {
        match self {
            GroupKey::Category => r.category.to_string(),
            GroupKey::Level => r.instruction_level.to_string(),
            GroupKey::Device => r.device.clone(),
            GroupKey::Split => r.split.clone().unwrap_or_else(|| "-".into()),
        }
    }

    /// Parses a comma-separated key list such as `category,level`.
    pub fn parse_list(s: &str) -> Result<Vec<GroupKey>, MetricsError> {
        s.split(',')
            .map(str::trim)
            .filter(|k| !k.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl FromStr for GroupKey {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "category" => Ok(GroupKey::Category),
            "level" => Ok(GroupKey::Level),
            "device" => Ok(GroupKey::Device),
            "split" => Ok(GroupKey::Split),
            other => Err(MetricsError::Config(format!("unknown grouping key {other:?}"))),
        }
    }
}

/// How the `Overall` row combines groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OverallWeighting {
    /// Pool all steps (AMS) and all episodes (SR).
    #[default]
    Pooled,
    /// Unweighted mean of the per-group scores.
    MeanOfGroups,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// One value per grouping key; `["Overall", ...]` for the summary row.
    pub key: Vec<String>,
    pub steps: Tally,
    pub episodes: Tally,
}

impl ReportRow {
    pub fn ams(&self) -> f64 {
        self.steps.ratio().unwrap_or(0.0)
    }

    pub fn sr(&self) -> f64 {
        self.episodes.ratio().unwrap_or(0.0)
    }

    pub fn n_steps(&self) -> u64 {
        self.steps.total
    }

    pub fn n_episodes(&self) -> u64 {
        self.episodes.total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub group_by: Vec<GroupKey>,
    /// Group rows in key order.
    pub rows: Vec<ReportRow>,
    /// Pooled counts over every record.
    pub overall: ReportRow,
    pub weighting: OverallWeighting,
}

impl EvalReport {
    pub fn overall_ams(&self) -> f64 {
        match self.weighting {
            OverallWeighting::Pooled => self.overall.ams(),
            OverallWeighting::MeanOfGroups => mean(self.rows.iter().map(ReportRow::ams)),
        }
    }

    pub fn overall_sr(&self) -> f64 {
        match self.weighting {
            OverallWeighting::Pooled => self.overall.sr(),
            OverallWeighting::MeanOfGroups => mean(self.rows.iter().map(ReportRow::sr)),
        }
    }

    pub fn row(&self, key: &[&str]) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.key.iter().map(String::as_str).eq(key.iter().copied()))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn build_report(
    records: &[EvalRecord],
    group_by: &[GroupKey],
    weighting: OverallWeighting,
) -> Result<EvalReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyGroup);
    }
    let mut seen = BTreeSet::new();
    for k in group_by {
        if !seen.insert(*k) {
            return Err(MetricsError::Config(format!("grouping key {} repeated", k.as_str())));
        }
    }
    let mut groups: BTreeMap<Vec<String>, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        let key = group_by.iter().map(|k| k.value(r)).collect();
        groups.entry(key).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (key, members) in groups {
        rows.push(ReportRow {
            key,
            steps: step_tally(members.iter().copied()),
            episodes: episode_tally(members.iter().copied())?,
        });
    }
    let overall = ReportRow {
        key: vec!["Overall".to_string(); group_by.len().max(1)],
        steps: rows.iter().fold(Tally::default(), |t, r| t.merge(r.steps)),
        episodes: rows.iter().fold(Tally::default(), |t, r| t.merge(r.episodes)),
    };
    Ok(EvalReport {
        group_by: group_by.to_vec(),
        rows,
        overall,
        weighting,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "markdown-table" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(MetricsError::Config(format!("unknown report format {other:?}"))),
        }
    }
}

fn key_headers(report: &EvalReport) -> Vec<&'static str> {
    if report.group_by.is_empty() {
        vec!["group"]
    } else {
        report.group_by.iter().map(GroupKey::as_str).collect()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Markdown shows percentages with two decimals; CSV shows fractions with
/// six decimals.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> Vec<u8> {
    let headers = key_headers(report);
    let mut rows: Vec<(&[String], f64, f64, u64, u64)> = report
        .rows
        .iter()
        .map(|r| (r.key.as_slice(), r.ams(), r.sr(), r.n_steps(), r.n_episodes()))
        .collect();
    let overall = &report.overall;
    rows.push((
        overall.key.as_slice(),
        report.overall_ams(),
        report.overall_sr(),
        overall.n_steps(),
        overall.n_episodes(),
    ));
    // a report without grouping keys has a single group keyed "all"
    let all = ["all".to_string()];

    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            out.push_str("| ");
            for h in &headers {
                out.push_str(h);
                out.push_str(" | ");
            }
            out.push_str("AMS | SR | n_steps | n_episodes |\n|");
            for _ in 0..headers.len() + 4 {
                out.push_str("---|");
            }
            out.push('\n');
            for (i, (key, ams, sr, n, e)) in rows.iter().enumerate() {
                let key = if key.is_empty() || (report.group_by.is_empty() && i + 1 < rows.len()) {
                    &all[..]
                } else {
                    key
                };
                out.push_str("| ");
                for k in key.iter() {
                    out.push_str(k);
                    out.push_str(" | ");
                }
                out.push_str(&format!("{:.2} | {:.2} | {n} | {e} |\n", ams * 100.0, sr * 100.0));
            }
        }
        ReportFormat::Csv => {
            out.push_str(&headers.join(","));
            out.push_str(",ams,sr,n_steps,n_episodes\n");
            for (i, (key, ams, sr, n, e)) in rows.iter().enumerate() {
                let key = if key.is_empty() || (report.group_by.is_empty() && i + 1 < rows.len()) {
                    &all[..]
                } else {
                    key
                };
                let cells: Vec<String> = key.iter().map(|k| csv_field(k)).collect();
                out.push_str(&cells.join(","));
                out.push_str(&format!(",{ams:.6},{sr:.6},{n},{e}\n"));
            }
        }
    }
    out.into_bytes()
}

/// One parsed CSV report line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub key: Vec<String>,
    pub ams: f64,
    pub sr: f64,
    pub n_steps: u64,
    pub n_episodes: u64,
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

/// Reads back a CSV report produced by [`render_report`].
pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>, MetricsError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(MetricsError::Csv {
        line: 1,
        message: "empty report".into(),
    })?;
    let n_keys = split_csv_line(header).len().saturating_sub(4);
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |message: String| MetricsError::Csv { line: i + 1, message };
        let cells = split_csv_line(line);
        if cells.len() != n_keys + 4 {
            return Err(err(format!("expected {} cells, got {}", n_keys + 4, cells.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(e.to_string()));
        let int = |s: &str| s.parse::<u64>().map_err(|e| err(e.to_string()));
        out.push(CsvRow {
            key: cells[..n_keys].to_vec(),
            ams: num(&cells[n_keys])?,
            sr: num(&cells[n_keys + 1])?,
            n_steps: int(&cells[n_keys + 2])?,
            n_episodes: int(&cells[n_keys + 3])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::MatchReason;

    fn rec(ep: &str, step: u32, len: u32, ok: bool, cat: TaskCategory) -> EvalRecord {
        EvalRecord {
            episode_id: ep.into(),
            step,
            instruction_level: InstructionLevel::High,
            outcome: if ok { MatchReason::OkType } else { MatchReason::TypeMismatch }.into(),
            category: cat,
            device: "Medium Phone".into(),
            episode_steps: len,
            split: None,
            gold: None,
            predicted: None,
        }
    }

    fn episode(ep: &str, outcomes: &[bool], cat: TaskCategory) -> Vec<EvalRecord> {
        let len = outcomes.len() as u32;
        outcomes
            .iter()
            .enumerate()
            .map(|(i, ok)| rec(ep, i as u32 + 1, len, *ok, cat))
            .collect()
    }

    #[test]
    fn ams_seven_of_ten() {
        let mut r = episode("a", &[true; 7], TaskCategory::GeneralTool);
        r.extend(episode("b", &[false; 3], TaskCategory::GeneralTool));
        assert_eq!(ams(&r).unwrap(), 0.7);
        assert_eq!(ams(&r[..7]).unwrap(), 1.0);
        assert_eq!(ams(&[]), Err(MetricsError::EmptyGroup));
    }

    #[test]
    fn sr_half() {
        let mut r = episode("a", &[true, true], TaskCategory::GeneralTool);
        r.extend(episode("b", &[true, false, true], TaskCategory::GeneralTool));
        assert_eq!(success_rate(&r).unwrap(), 0.5);
    }

    #[test]
    fn sr_requires_full_coverage() {
        let mut r = episode("a", &[true, true, true], TaskCategory::GeneralTool);
        r.remove(1);
        assert!(matches!(success_rate(&r), Err(MetricsError::IncompleteEpisode { .. })));
        let mut dup = episode("a", &[true, true], TaskCategory::GeneralTool);
        dup.push(dup[0].clone());
        assert!(matches!(success_rate(&dup), Err(MetricsError::IncompleteEpisode { .. })));
    }

    #[test]
    fn twelve_rows_plus_overall() {
        let mut r = Vec::new();
        for (i, cat) in TaskCategory::ALL.iter().enumerate() {
            for level in [InstructionLevel::High, InstructionLevel::Low] {
                let mut e = episode(&format!("e{i}"), &[true, i % 2 == 0], *cat);
                for x in &mut e {
                    x.instruction_level = level;
                }
                r.extend(e);
            }
        }
        let rep = build_report(&r, &[GroupKey::Category, GroupKey::Level], OverallWeighting::Pooled).unwrap();
        assert_eq!(rep.rows.len(), 12);
        let csv = String::from_utf8(render_report(&rep, ReportFormat::Csv)).unwrap();
        assert_eq!(csv.lines().count(), 14);
    }

    #[test]
    fn overall_is_pooled_not_mean_of_groups() {
        // 1 of 1 in one category, 1 of 4 in the other
        let mut r = episode("a", &[true], TaskCategory::WebShopping);
        r.extend(episode("b", &[true, false, false, false], TaskCategory::SocialSharing));
        let rep = build_report(&r, &[GroupKey::Category], OverallWeighting::Pooled).unwrap();
        assert_eq!(rep.overall_ams(), 2.0 / 5.0);
        let macro_ = build_report(&r, &[GroupKey::Category], OverallWeighting::MeanOfGroups).unwrap();
        assert_eq!(macro_.overall_ams(), (1.0 + 0.25) / 2.0);
    }

    #[test]
    fn single_category_row_equals_overall() {
        let r = episode("a", &[true, false, true], TaskCategory::MultiApps);
        let rep = build_report(&r, &[GroupKey::Category], OverallWeighting::Pooled).unwrap();
        assert_eq!(rep.rows[0].steps, rep.overall.steps);
        assert_eq!(rep.rows[0].episodes, rep.overall.episodes);
    }

    #[test]
    fn unknown_key_is_config_error() {
        assert!(matches!(GroupKey::parse_list("category,app"), Err(MetricsError::Config(_))));
    }

    #[test]
    fn csv_one_row_and_round_trip() {
        let r = episode("a", &[true, true, false], TaskCategory::MultiApps);
        let rep = build_report(&r, &[], OverallWeighting::Pooled).unwrap();
        let csv = String::from_utf8(render_report(&rep, ReportFormat::Csv)).unwrap();
        // header, the single group and the overall line
        assert_eq!(csv.lines().count(), 3);
        let back = parse_report_csv(&csv).unwrap();
        assert!((back[0].ams - 2.0 / 3.0).abs() < 5e-5);
        assert_eq!(back[0].n_steps, 3);
    }

    #[test]
    fn markdown_two_decimals_and_stable() {
        let mut r = Vec::new();
        // 7824 matched of 10000 steps renders as 78.24
        for i in 0..100 {
            let ok: Vec<bool> = (0..100).map(|j| i * 100 + j < 7824).collect();
            r.extend(episode(&format!("e{i}"), &ok, TaskCategory::GeneralTool));
        }
        let rep = build_report(&r, &[GroupKey::Category], OverallWeighting::Pooled).unwrap();
        let md = render_report(&rep, ReportFormat::Markdown);
        assert!(String::from_utf8(md.clone()).unwrap().contains("| GeneralTool | 78.24 |"));
        assert_eq!(md, render_report(&rep, ReportFormat::Markdown));
    }

    #[test]
    fn sr_can_exceed_pooled_ams_with_unequal_lengths() {
        let mut r = episode("short", &[true], TaskCategory::GeneralTool);
        r.extend(episode("long", &[false; 10], TaskCategory::GeneralTool));
        assert_eq!(success_rate(&r).unwrap(), 0.5);
        assert_eq!(ams(&r).unwrap(), 1.0 / 11.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn corpus_with(lens: std::ops::Range<usize>) -> impl Strategy<Value = Vec<EvalRecord>> {
            proptest::collection::vec((0usize..6, proptest::collection::vec(any::<bool>(), lens)), 1..20)
                .prop_map(|eps| {
                    eps.into_iter()
                        .enumerate()
                        .flat_map(|(i, (c, oks))| episode(&format!("e{i}"), &oks, TaskCategory::ALL[c]))
                        .collect()
                })
        }

        fn corpus() -> impl Strategy<Value = Vec<EvalRecord>> {
            corpus_with(1..8)
        }

        fn equal_lengths() -> impl Strategy<Value = Vec<EvalRecord>> {
            (1usize..8).prop_flat_map(|len| corpus_with(len..len + 1))
        }

        proptest! {
            #[test]
            fn sr_never_exceeds_ams_at_equal_lengths(r in equal_lengths()) {
                let rep = build_report(&r, &[GroupKey::Category], OverallWeighting::Pooled).unwrap();
                for row in rep.rows.iter().chain(std::iter::once(&rep.overall)) {
                    prop_assert!(row.sr() <= row.ams() + 1e-12);
                }
            }

            #[test]
            fn sr_never_exceeds_mean_episode_ams(r in corpus()) {
                let mut per: BTreeMap<&str, Tally> = BTreeMap::new();
                for x in &r {
                    per.entry(&x.episode_id).or_default().add(x.outcome.matched);
                }
                let macro_ams = mean(per.values().map(|t| t.ratio().unwrap()));
                prop_assert!(success_rate(&r).unwrap() <= macro_ams + 1e-12);
            }

            #[test]
            fn ams_ignores_order(mut r in corpus(), seed in any::<u64>()) {
                let before = ams(&r).unwrap();
                let n = r.len();
                for i in 0..n {
                    let j = (seed as usize).wrapping_mul(i + 7) % n;
                    r.swap(i, j);
                }
                prop_assert_eq!(ams(&r).unwrap(), before);
            }

            #[test]
            fn removing_an_episode_only_removes_its_counts(r in corpus(), pick in any::<prop::sample::Index>()) {
                let ids: BTreeSet<&str> = r.iter().map(|x| x.episode_id.as_str()).collect();
                let ids: Vec<&str> = ids.into_iter().collect();
                let gone = ids[pick.index(ids.len())];
                let kept: Vec<EvalRecord> = r.iter().filter(|x| x.episode_id != gone).cloned().collect();
                let removed: Vec<EvalRecord> = r.iter().filter(|x| x.episode_id == gone).cloned().collect();
                let all = build_report(&r, &[], OverallWeighting::Pooled).unwrap().overall;
                let part = step_tally(&removed);
                if kept.is_empty() {
                    prop_assert_eq!(all.steps, part);
                } else {
                    let rest = build_report(&kept, &[], OverallWeighting::Pooled).unwrap().overall;
                    prop_assert_eq!(rest.steps.merge(part), all.steps);
                    prop_assert_eq!(rest.episodes.total + 1, all.episodes.total);
                }
            }
        }
    }
}
