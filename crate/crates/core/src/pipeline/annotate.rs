//! Fine-grained episode annotation.
//!
//! Steps are annotated in order. For step `t` the stages run as contextual
//! (built only from steps before `t`), then screen description plus
//! rationale, then the low-level instruction. The first failure stops the
//! episode: that step and every later one stay unannotated.

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use super::llm::{complete_with_retry, IdempotencyKey, ImageAttachment, LlmBackend, LlmError, LlmRequest, OverlayMode, Stage};
use super::prompts::{PromptError, PromptSet};
use super::templates::InstructionInstance;
use crate::episode::{BoundingBox, Episode, SemanticAnnotation, Step};
use crate::seed::fnv1a;

pub const DEFAULT_LLM_RETRIES: u32 = 3;
/// Key under `task_info.extra` holding the pre-rewrite instruction.
pub const ORIGINAL_INSTRUCTION_KEY: &str = "original_instruction";
/// Key under `task_info.extra` listing app names the rewrite lost.
pub const REWRITE_MISSING_APPS_KEY: &str = "rewrite_missing_apps";

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("step {t} does not exist")]
    NoSuchStep { t: u32 },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("reply lacks the SCREEN:/RATIONALE: form: {0:?}")]
    Unparseable(String),
}

/// Builds requests and runs stages against one backend.
pub struct Annotator<'a> {
    pub llm: &'a dyn LlmBackend,
    pub prompts: PromptSet,
    pub retries: u32,
    /// Directory screenshot references resolve against.
    pub screenshot_root: Option<PathBuf>,
    pub overlay: OverlayMode,
    /// Where rendered overlay images go (image mode only).
    pub overlay_dir: Option<PathBuf>,
}

impl<'a> Annotator<'a> {
    pub fn new(llm: &'a dyn LlmBackend) -> Self {
        Self {
            llm,
            prompts: PromptSet::default(),
            retries: DEFAULT_LLM_RETRIES,
            screenshot_root: None,
            overlay: OverlayMode::Text,
            overlay_dir: None,
        }
    }

    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.screenshot_root = Some(root.into());
        self
    }

    fn step(ep: &Episode, t: u32) -> Result<&Step, AnnotateError> {
        ep.step(t).ok_or(AnnotateError::NoSuchStep { t })
    }

    fn key(ep: &Episode, t: u32, stage: Stage) -> IdempotencyKey {
        IdempotencyKey {
            episode_id: ep.episode_id.clone(),
            t,
            stage,
        }
    }

    fn screenshot_path(&self, step: &Step) -> PathBuf {
        match &self.screenshot_root {
            Some(root) => root.join(&step.screenshot),
            None => PathBuf::from(&step.screenshot),
        }
    }

    /// The screenshot, plus a marked copy when the action targets an
    /// element. Also returns the `{{overlay}}` prompt text.
    fn images(&self, ep: &Episode, step: &Step) -> (Vec<ImageAttachment>, String) {
        let shot = self.screenshot_path(step);
        let mut images = vec![ImageAttachment {
            path: shot.clone(),
            overlay: None,
            overlay_mode: None,
        }];
        if !step.action.kind().is_positional() {
            return (images, String::new());
        }
        // A positional step without a segmentation box gets a 1-pixel box on
        // the touch point so the attachment count stays fixed.
        let bbox = step.bbox.unwrap_or_else(|| {
            let p = step.action.points()[0];
            BoundingBox::new(p, p)
        });
        let (path, mode) = match self.overlay {
            OverlayMode::Image => match self.render_overlay(ep, step, &shot, &bbox) {
                Some(path) => (path, OverlayMode::Image),
                None => (shot, OverlayMode::Text),
            },
            OverlayMode::Text => (shot, OverlayMode::Text),
        };
        let dev = &ep.device_info;
        let text = match mode {
            OverlayMode::Image => "The second image marks the target element with a red box.".to_string(),
            OverlayMode::Text => format!(
                "Target element bounding box: {}-{} on a {}x{} screen.",
                bbox.min, bbox.max, dev.width, dev.height
            ),
        };
        images.push(ImageAttachment {
            path,
            overlay: Some(bbox),
            overlay_mode: Some(mode),
        });
        (images, text)
    }

    #[cfg(feature = "overlay")]
    fn render_overlay(&self, ep: &Episode, step: &Step, shot: &Path, bbox: &BoundingBox) -> Option<PathBuf> {
        let dir = self.overlay_dir.as_ref()?;
        let out = dir.join(format!("{}_{:03}_bbox.png", ep.episode_id, step.index));
        match super::overlay::draw_box(shot, bbox, &out) {
            Ok(()) => Some(out),
            Err(e) => {
                log::warn!("{}: overlay falls back to text: {e}", shot.display());
                None
            }
        }
    }

    #[cfg(not(feature = "overlay"))]
    fn render_overlay(&self, _: &Episode, _: &Step, shot: &Path, _: &BoundingBox) -> Option<PathBuf> {
        log::warn!("{}: built without image support; overlay falls back to text", shot.display());
        None
    }

    /// Request for step `t`'s contextual information. Reads the instruction
    /// and steps `1..t-1` only; `prior_rationales[i]` belongs to step `i+1`.
    pub fn contextual_request(&self, ep: &Episode, t: u32, prior_rationales: &[String]) -> Result<LlmRequest, AnnotateError> {
        Self::step(ep, t)?;
        let before = &ep.steps[..t as usize - 1];
        let actions = numbered(before.iter().map(|s| s.action.to_string()));
        let rationales = numbered(prior_rationales.iter().take(before.len()).cloned());
        let step = t.to_string();
        let p = &self.prompts.contextual;
        let user = p.render(&[
            ("instruction", &ep.task_info.high_level_instruction),
            ("step", &step),
            ("history_actions", &actions),
            ("history_rationales", &rationales),
        ])?;
        Ok(LlmRequest {
            key: Self::key(ep, t, Stage::Contextual),
            system: p.system.clone(),
            user,
            images: Vec::new(),
        })
    }

    pub fn screen_rationale_request(&self, ep: &Episode, t: u32, contextual: &str) -> Result<LlmRequest, AnnotateError> {
        let step = Self::step(ep, t)?;
        let (images, overlay) = self.images(ep, step);
        let action = step.action.to_string();
        let p = &self.prompts.screen_rationale;
        let user = p.render(&[
            ("instruction", &ep.task_info.high_level_instruction),
            ("contextual", contextual),
            ("action", &action),
            ("overlay", &overlay),
        ])?;
        Ok(LlmRequest {
            key: Self::key(ep, t, Stage::ScreenRationale),
            system: p.system.clone(),
            user,
            images,
        })
    }

    pub fn low_level_request(&self, ep: &Episode, t: u32) -> Result<LlmRequest, AnnotateError> {
        let step = Self::step(ep, t)?;
        let (images, overlay) = self.images(ep, step);
        let action = step.action.to_string();
        let p = &self.prompts.low_level;
        let user = p.render(&[
            ("instruction", &ep.task_info.high_level_instruction),
            ("action", &action),
            ("overlay", &overlay),
        ])?;
        Ok(LlmRequest {
            key: Self::key(ep, t, Stage::LowLevel),
            system: p.system.clone(),
            user,
            images,
        })
    }

    fn run(&self, req: &LlmRequest) -> Result<String, AnnotateError> {
        Ok(complete_with_retry(self.llm, req, self.retries)?.trim().to_string())
    }

    pub fn generate_contextual(&self, ep: &Episode, t: u32, prior_rationales: &[String]) -> Result<String, AnnotateError> {
        self.run(&self.contextual_request(ep, t, prior_rationales)?)
    }

    /// Returns `(screen_description, decision_rationale)`.
    pub fn generate_screen_and_rationale(&self, ep: &Episode, t: u32, contextual: &str) -> Result<(String, String), AnnotateError> {
        let reply = self.run(&self.screen_rationale_request(ep, t, contextual)?)?;
        parse_screen_rationale(&reply).ok_or(AnnotateError::Unparseable(reply))
    }

    pub fn generate_low_level(&self, ep: &Episode, t: u32) -> Result<String, AnnotateError> {
        self.run(&self.low_level_request(ep, t)?)
    }

    /// Annotates every step in order and returns the new episode. Existing
    /// annotations on steps that are reached are overwritten; steps after a
    /// failure are left exactly as they were.
    pub fn annotate_episode(&self, ep: &Episode) -> Annotated {
        let mut out = ep.clone();
        let mut report = AnnotationReport {
            episode_id: ep.episode_id.clone(),
            ..AnnotationReport::default()
        };
        let mut rationales: Vec<String> = Vec::with_capacity(ep.steps.len());
        for t in 1..=ep.steps.len() as u32 {
            match self.annotate_step(ep, t, &rationales) {
                Ok((semantic, low_level, overlay)) => {
                    rationales.push(semantic.decision_rationale.clone());
                    let step = &mut out.steps[t as usize - 1];
                    step.semantic = Some(semantic);
                    step.low_level_instruction = Some(low_level);
                    report.annotated_steps += 1;
                    match overlay {
                        Some(OverlayMode::Image) => report.image_overlays += 1,
                        Some(OverlayMode::Text) => report.text_overlays += 1,
                        None => {}
                    }
                }
                Err((stage, error)) => {
                    for later in t..=ep.steps.len() as u32 {
                        report.unannotated.push(later);
                    }
                    report.failure = Some(StepFailure {
                        t,
                        stage,
                        message: error.to_string(),
                    });
                    break;
                }
            }
        }
        Annotated { episode: out, report }
    }

    #[allow(clippy::type_complexity)]
    fn annotate_step(
        &self,
        ep: &Episode,
        t: u32,
        rationales: &[String],
    ) -> Result<(SemanticAnnotation, String, Option<OverlayMode>), (Stage, AnnotateError)> {
        let contextual = self
            .generate_contextual(ep, t, rationales)
            .map_err(|e| (Stage::Contextual, e))?;
        let (screen, rationale) = self
            .generate_screen_and_rationale(ep, t, &contextual)
            .map_err(|e| (Stage::ScreenRationale, e))?;
        let req = self.low_level_request(ep, t).map_err(|e| (Stage::LowLevel, e))?;
        let overlay = req.images.last().and_then(|i| i.overlay_mode);
        let low = self.run(&req).map_err(|e| (Stage::LowLevel, e))?;
        Ok((
            SemanticAnnotation {
                screen_description: screen,
                contextual_info: contextual,
                decision_rationale: rationale,
            },
            low,
            overlay,
        ))
    }

    pub fn rewrite_request(&self, instance: &InstructionInstance) -> Result<LlmRequest, AnnotateError> {
        let apps = instance.apps.join(", ");
        let p = &self.prompts.rewrite;
        let user = p.render(&[("instruction", &instance.instruction), ("apps", &apps)])?;
        let digest = fnv1a(&[instance.instruction.as_bytes()]) & 0xffff_ffff;
        Ok(LlmRequest {
            key: IdempotencyKey {
                episode_id: format!("{}#{digest:08x}", instance.template_id),
                t: 0,
                stage: Stage::Rewrite,
            },
            system: p.system.clone(),
            user,
            images: Vec::new(),
        })
    }

    /// Asks for a rephrasing. Backend failure keeps the original text and
    /// sets a warning; a rewrite that loses an app name is returned but
    /// flagged.
    pub fn rewrite_instruction(&self, instance: &InstructionInstance) -> Result<Rewrite, AnnotateError> {
        let req = self.rewrite_request(instance)?;
        let (rewritten, warning) = match self.run(&req) {
            Ok(text) if !text.is_empty() => (text, None),
            Ok(_) => (instance.instruction.clone(), Some("empty rewrite; original kept".to_string())),
            Err(e) => {
                log::warn!("{}: rewrite failed, original kept: {e}", req.key);
                (instance.instruction.clone(), Some(format!("rewrite failed, original kept: {e}")))
            }
        };
        let missing_apps = instance
            .apps
            .iter()
            .filter(|app| !rewritten.contains(app.as_str()))
            .cloned()
            .collect();
        Ok(Rewrite {
            original: instance.instruction.clone(),
            rewritten,
            missing_apps,
            warning,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewrite {
    pub original: String,
    pub rewritten: String,
    /// Bound apps absent from the rewrite.
    pub missing_apps: Vec<String>,
    pub warning: Option<String>,
}

impl Rewrite {
    pub fn preserves_apps(&self) -> bool {
        self.missing_apps.is_empty()
    }
}

/// Installs a rewrite as the episode's instruction, keeping the original
/// (and any lost app names) in `task_info.extra` for the quality check.
pub fn apply_rewrite(ep: &mut Episode, rewrite: &Rewrite) {
    let task = &mut ep.task_info;
    task.high_level_instruction = rewrite.rewritten.clone();
    task.extra
        .insert(ORIGINAL_INSTRUCTION_KEY.into(), Value::String(rewrite.original.clone()));
    if rewrite.missing_apps.is_empty() {
        task.extra.remove(REWRITE_MISSING_APPS_KEY);
    } else {
        task.extra.insert(
            REWRITE_MISSING_APPS_KEY.into(),
            Value::from(rewrite.missing_apps.clone()),
        );
    }
}

fn numbered(items: impl Iterator<Item = String>) -> String {
    let lines: Vec<String> = items.enumerate().map(|(i, s)| format!("{}. {s}", i + 1)).collect();
    if lines.is_empty() {
        "(none)".into()
    } else {
        lines.join("\n")
    }
}

/// Splits a `SCREEN: ... RATIONALE: ...` reply.
pub fn parse_screen_rationale(reply: &str) -> Option<(String, String)> {
    let s = reply.find("SCREEN:")?;
    let r = reply.find("RATIONALE:")?;
    if r < s {
        return None;
    }
    let screen = reply[s + "SCREEN:".len()..r].trim();
    let rationale = reply[r + "RATIONALE:".len()..].trim();
    if screen.is_empty() || rationale.is_empty() {
        return None;
    }
    Some((screen.to_string(), rationale.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepFailure {
    pub t: u32,
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for StepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} {}: {}", self.t, self.stage, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationReport {
    pub episode_id: String,
    pub annotated_steps: usize,
    /// Steps left as they were because of `failure`.
    pub unannotated: Vec<u32>,
    pub failure: Option<StepFailure>,
    pub text_overlays: usize,
    pub image_overlays: usize,
}

impl AnnotationReport {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotated {
    pub episode: Episode,
    pub report: AnnotationReport,
}
