//! Dataset construction: instruction templates, LLM-backed step annotation
//! and the data quality check.

pub mod annotate;
pub mod llm;
#[cfg(feature = "overlay")]
pub mod overlay;
pub mod prompts;
pub mod quality;
pub mod templates;

pub use annotate::{apply_rewrite, Annotated, AnnotationReport, Annotator, Rewrite};
pub use llm::{HttpBackend, LlmBackend, LlmError, LlmRequest, MockBackend, OverlayMode, Stage};
pub use prompts::PromptSet;
pub use quality::{quality_check, Judge, QualityVerdict, Status};
pub use templates::{expand_template, InstructionInstance, InstructionTemplate};
