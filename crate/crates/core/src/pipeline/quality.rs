//! Three-criteria data quality check.
//!
//! (i) every screenshot reference is present and, given a root, resolves to
//! a file. (ii) the episode can complete its instruction: a structural proxy
//! (well-placed terminal action, ordered indices, no repeated positional
//! action on consecutive steps), optionally confirmed by an LLM judge.
//! (iii) a rewritten instruction keeps its apps and, with a judge, means the
//! same as the original. Without rewrite metadata (iii) is skipped.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::annotate::{ORIGINAL_INSTRUCTION_KEY, REWRITE_MISSING_APPS_KEY};
use super::llm::{complete_with_retry, IdempotencyKey, ImageAttachment, LlmBackend, LlmRequest, Stage};
use super::prompts::PromptSet;
use crate::episode::{validate_structure, Episode, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Criterion {
    pub status: Status,
    pub reason: String,
}

impl Criterion {
    fn pass(reason: impl Into<String>) -> Self {
        Self {
            status: Status::Pass,
            reason: reason.into(),
        }
    }

    fn fail(reason: impl Into<String>) -> Self {
        Self {
            status: Status::Fail,
            reason: reason.into(),
        }
    }

    fn skipped(reason: impl Into<String>) -> Self {
        Self {
            status: Status::Skipped,
            reason: reason.into(),
        }
    }
}

/// Which checks decided criterion ii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeMode {
    Structural,
    StructuralAndLlm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QualityVerdict {
    pub episode_id: String,
    pub criterion_i: Criterion,
    pub criterion_ii: Criterion,
    pub criterion_iii: Criterion,
    pub mode: JudgeMode,
}

impl QualityVerdict {
    pub fn accepted(&self) -> bool {
        [&self.criterion_i, &self.criterion_ii, &self.criterion_iii]
            .iter()
            .all(|c| c.status != Status::Fail)
    }
}

impl fmt::Display for QualityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |c: &Criterion| match c.status {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        };
        write!(
            f,
            "{}: i={} ii={} iii={} -> {}",
            self.episode_id,
            s(&self.criterion_i),
            s(&self.criterion_ii),
            s(&self.criterion_iii),
            if self.accepted() { "accepted" } else { "rejected" }
        )
    }
}

/// Judge used by [`quality_check`].
pub struct Judge<'a> {
    pub llm: &'a dyn LlmBackend,
    pub prompts: &'a PromptSet,
    pub retries: u32,
}

impl Judge<'_> {
    /// `Ok(true)` for a reply whose first line starts with YES. Backend
    /// failures and unreadable replies are errors.
    fn ask(&self, req: &LlmRequest) -> Result<(bool, String), String> {
        let reply = complete_with_retry(self.llm, req, self.retries).map_err(|e| e.to_string())?;
        let first = reply.lines().next().unwrap_or("").trim().to_ascii_uppercase();
        let rest = reply.lines().skip(1).collect::<Vec<_>>().join(" ").trim().to_string();
        if first.starts_with("YES") {
            Ok((true, rest))
        } else if first.starts_with("NO") {
            Ok((false, rest))
        } else {
            Err(format!("judge reply is neither YES nor NO: {:?}", reply.trim()))
        }
    }
}

fn key(ep: &Episode, stage: Stage) -> IdempotencyKey {
    IdempotencyKey {
        episode_id: ep.episode_id.clone(),
        t: 0,
        stage,
    }
}

pub fn completion_request(ep: &Episode, root: Option<&Path>, prompts: &PromptSet) -> LlmRequest {
    let actions: Vec<String> = ep
        .steps
        .iter()
        .map(|s| format!("{}. {}", s.index, s.action))
        .collect();
    let p = &prompts.judge_completion;
    let user = p
        .render(&[
            ("instruction", &ep.task_info.high_level_instruction),
            ("actions", &actions.join("\n")),
        ])
        .unwrap_or_else(|e| format!("{}\n[{e}]", p.user));
    let images = ep
        .steps
        .iter()
        .map(|s| ImageAttachment {
            path: root.map_or_else(|| PathBuf::from(&s.screenshot), |r| r.join(&s.screenshot)),
            overlay: None,
            overlay_mode: None,
        })
        .collect();
    LlmRequest {
        key: key(ep, Stage::JudgeCompletion),
        system: p.system.clone(),
        user,
        images,
    }
}

pub fn equivalence_request(ep: &Episode, original: &str, prompts: &PromptSet) -> LlmRequest {
    let p = &prompts.judge_equivalence;
    let user = p
        .render(&[
            ("original", original),
            ("rewritten", &ep.task_info.high_level_instruction),
        ])
        .unwrap_or_else(|e| format!("{}\n[{e}]", p.user));
    LlmRequest {
        key: key(ep, Stage::JudgeEquivalence),
        system: p.system.clone(),
        user,
        images: Vec::new(),
    }
}

fn criterion_i(ep: &Episode, root: Option<&Path>) -> Criterion {
    let bad: Vec<String> = validate_structure(ep, root)
        .into_iter()
        .filter(|v| matches!(v.rule, Rule::ScreenshotEmpty | Rule::ScreenshotMissing))
        .map(|v| v.to_string())
        .collect();
    match (bad.is_empty(), root) {
        (true, Some(_)) => Criterion::pass("every screenshot file exists"),
        (true, None) => Criterion::pass("every step has a screenshot reference"),
        (false, _) => Criterion::fail(bad.join("; ")),
    }
}

fn structural_ii(ep: &Episode) -> Result<(), String> {
    let mut problems: Vec<String> = validate_structure(ep, None)
        .into_iter()
        .filter(|v| {
            matches!(
                v.rule,
                Rule::EmptySteps | Rule::TerminalAction | Rule::EarlyTerminal | Rule::StepIndex
            )
        })
        .map(|v| v.to_string())
        .collect();
    for pair in ep.steps.windows(2) {
        if pair[0].action.kind().is_positional() && pair[0].action == pair[1].action {
            problems.push(format!(
                "steps {} and {} repeat {}",
                pair[0].index, pair[1].index, pair[1].action
            ));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    }
}

/// Runs all three criteria. The episode is only read.
pub fn quality_check(ep: &Episode, screenshot_root: Option<&Path>, judge: Option<&Judge<'_>>) -> QualityVerdict {
    let criterion_i = criterion_i(ep, screenshot_root);

    let criterion_ii = match (structural_ii(ep), judge) {
        (Err(why), _) => Criterion::fail(why),
        (Ok(()), None) => Criterion::pass("structural checks passed"),
        (Ok(()), Some(j)) => match j.ask(&completion_request(ep, screenshot_root, j.prompts)) {
            Ok((true, why)) => Criterion::pass(format!("structural checks passed; judge: {why}")),
            Ok((false, why)) => Criterion::fail(format!("judge: {why}")),
            Err(e) => Criterion::fail(e),
        },
    };

    let extra = &ep.task_info.extra;
    let criterion_iii = match extra.get(ORIGINAL_INSTRUCTION_KEY).and_then(Value::as_str) {
        None => Criterion::skipped("no rewrite recorded"),
        Some(original) => match extra.get(REWRITE_MISSING_APPS_KEY) {
            Some(missing) => Criterion::fail(format!("rewrite dropped apps {missing}")),
            None => match judge {
                None if original == ep.task_info.high_level_instruction => {
                    Criterion::pass("rewrite identical to the original")
                }
                None => Criterion::skipped("no judge configured"),
                Some(j) => match j.ask(&equivalence_request(ep, original, j.prompts)) {
                    Ok((true, why)) => Criterion::pass(format!("judge: {why}")),
                    Ok((false, why)) => Criterion::fail(format!("judge: {why}")),
                    Err(e) => Criterion::fail(e),
                },
            },
        },
    };

    QualityVerdict {
        episode_id: ep.episode_id.clone(),
        criterion_i,
        criterion_ii,
        criterion_iii,
        mode: if judge.is_some() {
            JudgeMode::StructuralAndLlm
        } else {
            JudgeMode::Structural
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{Action, Point};
    use crate::pipeline::annotate::{apply_rewrite, Rewrite};
    use crate::pipeline::llm::MockBackend;
    use crate::synth::{generate_corpus, write_synthetic, GenSpec};

    fn corpus_dir() -> (tempfile::TempDir, crate::episode::Corpus) {
        let spec = GenSpec::new(5, 3);
        let corpus = generate_corpus(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_synthetic(&corpus, &spec.catalog(), dir.path()).unwrap();
        (dir, corpus)
    }

    #[test]
    fn synthetic_episode_with_approving_judge_passes() {
        let (dir, corpus) = corpus_dir();
        let mock = MockBackend::new();
        let prompts = PromptSet::default();
        let judge = Judge {
            llm: &mock,
            prompts: &prompts,
            retries: 0,
        };
        for ep in &corpus.episodes {
            let mut ep = ep.clone();
            let original = ep.task_info.high_level_instruction.clone();
            apply_rewrite(
                &mut ep,
                &Rewrite {
                    original: original.clone(),
                    rewritten: original,
                    missing_apps: vec![],
                    warning: None,
                },
            );
            let v = quality_check(&ep, Some(dir.path()), Some(&judge));
            assert!(v.accepted(), "{v:?}");
            assert_eq!(v.criterion_iii.status, Status::Pass);
            assert_eq!(v.mode, JudgeMode::StructuralAndLlm);
        }
    }

    #[test]
    fn missing_screenshot_fails_i() {
        let (dir, corpus) = corpus_dir();
        let ep = &corpus.episodes[0];
        std::fs::remove_file(dir.path().join(&ep.steps[0].screenshot)).unwrap();
        let v = quality_check(ep, Some(dir.path()), None);
        assert_eq!(v.criterion_i.status, Status::Fail);
        assert!(!v.accepted());
    }

    #[test]
    fn no_rewrite_no_llm_skips_iii() {
        let (_dir, corpus) = corpus_dir();
        let v = quality_check(&corpus.episodes[0], None, None);
        assert_eq!(v.criterion_iii.status, Status::Skipped);
        assert_eq!(v.mode, JudgeMode::Structural);
        assert!(v.accepted());
    }

    #[test]
    fn repeated_click_fails_ii() {
        let (_dir, corpus) = corpus_dir();
        let mut ep = corpus.episodes[0].clone();
        let click = Action::Click { pos1: Point::new(3, 4) };
        ep.steps[0].action = click.clone();
        ep.steps[0].bbox = None;
        ep.steps[1].action = click;
        ep.steps[1].bbox = None;
        let v = quality_check(&ep, None, None);
        assert_eq!(v.criterion_ii.status, Status::Fail);
    }

    #[test]
    fn disapproving_judge_and_dropped_apps() {
        let (_dir, corpus) = corpus_dir();
        let mock = MockBackend::new().disapproving();
        let prompts = PromptSet::default();
        let judge = Judge {
            llm: &mock,
            prompts: &prompts,
            retries: 0,
        };
        let mut ep = corpus.episodes[0].clone();
        apply_rewrite(
            &mut ep,
            &Rewrite {
                original: "a".into(),
                rewritten: "b".into(),
                missing_apps: vec!["Maps".into()],
                warning: None,
            },
        );
        let v = quality_check(&ep, None, Some(&judge));
        assert_eq!(v.criterion_ii.status, Status::Fail);
        assert_eq!(v.criterion_iii.status, Status::Fail);
        assert!(v.criterion_iii.reason.contains("Maps"));
    }

    #[test]
    fn check_does_not_mutate() {
        let (dir, corpus) = corpus_dir();
        let before = corpus.clone();
        for ep in &corpus.episodes {
            quality_check(ep, Some(dir.path()), None);
        }
        assert_eq!(before.episodes, corpus.episodes);
    }
}
