//! A corpus on disk is a directory holding one JSON document per episode and
//! a newline-delimited manifest (`manifest.jsonl`) with one
//! `{"path": ..., "sha256": ...}` line per episode, paths relative to the
//! corpus root. Screenshot references inside episodes are relative to the
//! same root.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{parse_episode, serialize_episode, Episode, ParseError, SerializeError, TaskCategory};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
const EPISODE_DIR: &str = "episodes";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate episode_id {0:?}")]
    DuplicateId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{path}: {source}")]
    Serialize {
        path: PathBuf,
        #[source]
        source: SerializeError,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{path}: digest mismatch (manifest {expected}, file {actual})")]
    Digest {
        path: PathBuf,
        expected: String,
        actual: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub episodes: Vec<Episode>,
    /// Directory the corpus was loaded from; screenshot references resolve
    /// against it.
    pub root: Option<PathBuf>,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

impl Corpus {
    /// Builds an in-memory corpus, rejecting duplicate episode ids.
    pub fn new(episodes: Vec<Episode>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(episodes.len());
        for ep in &episodes {
            if !seen.insert(ep.episode_id.as_str()) {
                return Err(CorpusError::DuplicateId(ep.episode_id.clone()));
            }
        }
        Ok(Self {
            episodes,
            root: None,
        })
    }

    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = Some(root.into());
        self
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn get(&self, episode_id: &str) -> Option<&Episode> {
        self.episodes.iter().find(|e| e.episode_id == episode_id)
    }

    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn category_counts(&self) -> BTreeMap<TaskCategory, usize> {
        let mut out = BTreeMap::new();
        for ep in &self.episodes {
            *out.entry(ep.task_info.category).or_insert(0) += 1;
        }
        out
    }

    pub fn device_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for ep in &self.episodes {
            *out.entry(ep.device_info.name.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Keeps only the listed episodes, in corpus order.
    pub fn subset(&self, ids: &BTreeSet<String>) -> Corpus {
        Corpus {
            episodes: self
                .episodes
                .iter()
                .filter(|e| ids.contains(&e.episode_id))
                .cloned()
                .collect(),
            root: self.root.clone(),
        }
    }

    /// Writes every episode under `dir/episodes/` plus the manifest and
    /// returns the manifest entries.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
        let ep_dir = dir.join(EPISODE_DIR);
        fs::create_dir_all(&ep_dir).map_err(io_err(&ep_dir))?;
        let mut used = HashSet::new();
        let mut entries = Vec::with_capacity(self.episodes.len());
        for ep in &self.episodes {
            let stem = file_stem_for(&ep.episode_id);
            let mut name = format!("{stem}.json");
            let mut n = 1;
            while !used.insert(name.clone()) {
                n += 1;
                name = format!("{stem}.{n}.json");
            }
            let rel = format!("{EPISODE_DIR}/{name}");
            let path = dir.join(&rel);
            let bytes = serialize_episode(ep).map_err(|source| CorpusError::Serialize {
                path: path.clone(),
                source,
            })?;
            fs::write(&path, &bytes).map_err(io_err(&path))?;
            entries.push(ManifestEntry {
                path: rel,
                sha256: sha256_hex(&bytes),
            });
        }
        let manifest = dir.join(MANIFEST_FILE);
        let mut f = io::BufWriter::new(fs::File::create(&manifest).map_err(io_err(&manifest))?);
        for e in &entries {
            let line = serde_json::to_string(e).expect("manifest entries serialize");
            writeln!(f, "{line}").map_err(io_err(&manifest))?;
        }
        f.flush().map_err(io_err(&manifest))?;
        Ok(entries)
    }

    pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
        let path = dir.join(MANIFEST_FILE);
        let f = fs::File::open(&path).map_err(io_err(&path))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry =
                serde_json::from_str(&line).map_err(|e| CorpusError::Manifest {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            out.push(entry);
        }
        Ok(out)
    }

    /// Loads a corpus directory through its manifest, verifying digests.
    pub fn load_dir(dir: &Path) -> Result<Corpus, CorpusError> {
        let entries = Self::read_manifest(dir)?;
        let mut episodes = Vec::with_capacity(entries.len());
        for entry in entries {
            let path = dir.join(&entry.path);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let actual = sha256_hex(&bytes);
            if actual != entry.sha256 {
                return Err(CorpusError::Digest {
                    path,
                    expected: entry.sha256,
                    actual,
                });
            }
            let ep = parse_episode(&bytes).map_err(|source| CorpusError::Parse {
                path: path.clone(),
                source,
            })?;
            episodes.push(ep);
        }
        Ok(Corpus::new(episodes)?.with_root(dir))
    }
}
