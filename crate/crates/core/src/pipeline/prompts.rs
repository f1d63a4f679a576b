//! Prompt templates for the annotation and quality-check stages.
//!
//! Each template file holds a system text, a line containing only `---`,
//! then a user text with `{{name}}` placeholders. The defaults are compiled
//! in; [`PromptSet::load_dir`] overrides any of them from editable files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::llm::Stage;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt {name}: missing the `---` separator line")]
    NoSeparator { name: String },
    #[error("prompt {name}: unterminated placeholder")]
    Unterminated { name: String },
    #[error("prompt {name}: no value for placeholder {{{{{placeholder}}}}}")]
    Unbound { name: String, placeholder: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub system: String,
    pub user: String,
}

impl PromptTemplate {
    pub fn parse(name: &str, text: &str) -> Result<Self, PromptError> {
        let mut system = Vec::new();
        let mut lines = text.lines();
        let mut found = false;
        for line in lines.by_ref() {
            if line.trim() == "---" {
                found = true;
                break;
            }
            system.push(line);
        }
        if !found {
            return Err(PromptError::NoSeparator { name: name.into() });
        }
        let user: Vec<&str> = lines.collect();
        Ok(Self {
            name: name.into(),
            system: system.join("\n").trim().to_string(),
            user: user.join("\n").trim().to_string(),
        })
    }

    /// Fills every `{{name}}` in the user text. Substituted values are not
    /// rescanned, so a value containing braces is inserted verbatim.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.user.len());
        let mut rest = self.user.as_str();
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let close = after.find("}}").ok_or_else(|| PromptError::Unterminated {
                name: self.name.clone(),
            })?;
            let key = after[..close].trim();
            let value = vars
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| PromptError::Unbound {
                    name: self.name.clone(),
                    placeholder: key.to_string(),
                })?;
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub low_level: PromptTemplate,
    pub contextual: PromptTemplate,
    pub screen_rationale: PromptTemplate,
    pub rewrite: PromptTemplate,
    pub judge_completion: PromptTemplate,
    pub judge_equivalence: PromptTemplate,
}

const DEFAULTS: [(Stage, &str, &str); 6] = [
    (Stage::LowLevel, "low_level", include_str!("../../prompts/low_level.txt")),
    (Stage::Contextual, "contextual", include_str!("../../prompts/contextual.txt")),
    (
        Stage::ScreenRationale,
        "screen_rationale",
        include_str!("../../prompts/screen_rationale.txt"),
    ),
    (Stage::Rewrite, "rewrite", include_str!("../../prompts/rewrite.txt")),
    (
        Stage::JudgeCompletion,
        "judge_completion",
        include_str!("../../prompts/judge_completion.txt"),
    ),
    (
        Stage::JudgeEquivalence,
        "judge_equivalence",
        include_str!("../../prompts/judge_equivalence.txt"),
    ),
];

impl Default for PromptSet {
    fn default() -> Self {
        Self::from_sources(|_, text| Ok(text.to_string())).expect("built-in prompts parse")
    }
}

impl PromptSet {
    fn from_sources(
        mut source: impl FnMut(&str, &str) -> Result<String, PromptError>,
    ) -> Result<Self, PromptError> {
        let mut parsed = Vec::with_capacity(DEFAULTS.len());
        for (_, name, text) in DEFAULTS {
            parsed.push(PromptTemplate::parse(name, &source(name, text)?)?);
        }
        let mut it = parsed.into_iter();
        let mut next = || it.next().expect("six prompts");
        Ok(Self {
            low_level: next(),
            contextual: next(),
            screen_rationale: next(),
            rewrite: next(),
            judge_completion: next(),
            judge_equivalence: next(),
        })
    }

    /// Built-in prompts, replaced by `<dir>/<name>.txt` where such a file
    /// exists.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        Self::from_sources(|name, default| {
            let path = dir.join(format!("{name}.txt"));
            match fs::read_to_string(&path) {
                Ok(text) => Ok(text),
                Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(default.to_string()),
                Err(source) => Err(PromptError::Io { path, source }),
            }
        })
    }

    /// Writes the current templates as editable files.
    pub fn write_dir(&self, dir: &Path) -> Result<(), PromptError> {
        fs::create_dir_all(dir).map_err(|source| PromptError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (stage, name, _) in DEFAULTS {
            let p = self.get(stage);
            let path = dir.join(format!("{name}.txt"));
            fs::write(&path, format!("{}\n---\n{}\n", p.system, p.user))
                .map_err(|source| PromptError::Io { path, source })?;
        }
        Ok(())
    }

    pub fn get(&self, stage: Stage) -> &PromptTemplate {
        match stage {
            Stage::LowLevel => &self.low_level,
            Stage::Contextual => &self.contextual,
            Stage::ScreenRationale => &self.screen_rationale,
            Stage::Rewrite => &self.rewrite,
            Stage::JudgeCompletion => &self.judge_completion,
            Stage::JudgeEquivalence => &self.judge_equivalence,
        }
    }
}
