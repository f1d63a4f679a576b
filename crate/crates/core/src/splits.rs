//! The four train/test setups: random, task (held-out templates), device
//! (one device held out) and app (least-frequent apps per app category held
//! out).
//!
//! Every strategy starts from the episode ids in sorted order, so a split
//! depends only on the set of ids, the episode metadata and the seed, never
//! on file or iteration order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::episode::{Corpus, TaskCategory};
use crate::seed::rng_for;

pub const TRAIN_FILE: &str = "train.ids";
pub const TEST_FILE: &str = "test.ids";

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("infeasible split: {0}")]
    Infeasible(String),
    #[error("split configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Random { ratio: f64 },
    Task { test_fraction: f64 },
    Device { device_name: String },
    App {
        /// app -> app category
        category_map: BTreeMap<String, String>,
        holdout_per_category: usize,
        target_test_fraction: f64,
    },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random { .. } => "random",
            Strategy::Task { .. } => "task",
            Strategy::Device { .. } => "device",
            Strategy::App { .. } => "app",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub strategy: Strategy,
    /// Required for every strategy except `device`.
    pub seed: Option<u64>,
}

impl SplitSpec {
    pub fn new(strategy: Strategy, seed: Option<u64>) -> Self {
        Self { strategy, seed }
    }

    fn check(&self) -> Result<(), SplitError> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(SplitError::Config(format!("{name} must be in (0,1), got {v}")))
            }
        };
        match &self.strategy {
            Strategy::Random { ratio } => unit("ratio", *ratio)?,
            Strategy::Task { test_fraction } => unit("test fraction", *test_fraction)?,
            Strategy::App {
                target_test_fraction, ..
            } => unit("target test fraction", *target_test_fraction)?,
            Strategy::Device { .. } => return Ok(()),
        }
        if self.seed.is_none() {
            return Err(SplitError::Config(format!(
                "the {} strategy requires a seed",
                self.strategy.name()
            )));
        }
        Ok(())
    }

    /// One-line provenance header written at the top of both id files.
    pub fn provenance(&self) -> String {
        let mut out = format!("# strategy={}", self.strategy.name());
        if let Some(seed) = self.seed {
            out.push_str(&format!(" seed={seed}"));
        }
        match &self.strategy {
            Strategy::Random { ratio } => out.push_str(&format!(" ratio={ratio}")),
            Strategy::Task { test_fraction } => out.push_str(&format!(" test_fraction={test_fraction:.6}")),
            Strategy::Device { device_name } => out.push_str(&format!(" device={device_name:?}")),
            Strategy::App {
                category_map,
                holdout_per_category,
                target_test_fraction,
            } => out.push_str(&format!(
                " holdout_per_category={holdout_per_category} target_test_fraction={target_test_fraction} mapped_apps={}",
                category_map.len()
            )),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    /// Sorted episode ids.
    pub train: Vec<String>,
    /// Sorted episode ids.
    pub test: Vec<String>,
    /// What was held out: template ids (task), apps (app), the device name
    /// (device); empty for random.
    pub held_out: Vec<String>,
    pub provenance: String,
}

impl SplitResult {
    fn from_test(ids: &[String], test: &BTreeSet<&str>, held_out: Vec<String>, provenance: String) -> Self {
        let (test, train): (Vec<String>, Vec<String>) = ids.iter().cloned().partition(|id| test.contains(id.as_str()));
        Self {
            train,
            test,
            held_out,
            provenance,
        }
    }

    pub fn test_fraction(&self) -> f64 {
        self.test.len() as f64 / (self.train.len() + self.test.len()).max(1) as f64
    }

    /// True when train and test are disjoint and together cover `corpus`.
    pub fn is_partition_of(&self, corpus: &Corpus) -> bool {
        let train: BTreeSet<&str> = self.train.iter().map(String::as_str).collect();
        let test: BTreeSet<&str> = self.test.iter().map(String::as_str).collect();
        let all: BTreeSet<&str> = corpus.episodes.iter().map(|e| e.episode_id.as_str()).collect();
        train.is_disjoint(&test)
            && train.len() == self.train.len()
            && test.len() == self.test.len()
            && train.union(&test).copied().collect::<BTreeSet<_>>() == all
    }

    /// Writes `train.ids` and `test.ids` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SplitError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| SplitError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, ids) in [(TRAIN_FILE, &self.train), (TEST_FILE, &self.test)] {
            let path = dir.join(name);
            let mut text = self.provenance.clone();
            text.push('\n');
            for id in ids {
                text.push_str(id);
                text.push('\n');
            }
            fs::write(&path, text).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

impl fmt::Display for SplitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "train={} test={} ({:.2}% test)",
            self.train.len(),
            self.test.len(),
            100.0 * self.test_fraction()
        )
    }
}

/// Reads an id file, skipping `#` comment lines and blanks.
pub fn read_ids(path: &Path) -> Result<Vec<String>, SplitError> {
    let text = fs::read_to_string(path).map_err(|source| SplitError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Parses an `app,category` CSV (header optional).
pub fn parse_category_map(text: &str) -> Result<BTreeMap<String, String>, SplitError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.eq_ignore_ascii_case("app,category")) {
            continue;
        }
        let (app, cat) = line
            .rsplit_once(',')
            .ok_or_else(|| SplitError::Config(format!("category map line {}: expected app,category", i + 1)))?;
        out.insert(app.trim().to_string(), cat.trim().to_string());
    }
    Ok(out)
}

fn sorted_ids(corpus: &Corpus) -> Vec<String> {
    let mut ids: Vec<String> = corpus.episodes.iter().map(|e| e.episode_id.clone()).collect();
    ids.sort();
    ids
}

pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    spec.check()?;
    if corpus.is_empty() {
        return Err(SplitError::Infeasible("corpus is empty".into()));
    }
    let seed = spec.seed.unwrap_or_default();
    let provenance = spec.provenance();
    let mut out = match &spec.strategy {
        Strategy::Random { ratio } => split_random(corpus, seed, *ratio),
        Strategy::Task { test_fraction } => split_task(corpus, seed, *test_fraction)?,
        Strategy::Device { device_name } => split_device(corpus, device_name)?,
        Strategy::App {
            category_map,
            holdout_per_category,
            target_test_fraction,
        } => split_app(corpus, category_map, *holdout_per_category, seed, *target_test_fraction)?,
    };
    out.provenance = provenance;
    Ok(out)
}

/// `floor(ratio * N)` episodes to train after a seeded shuffle.
pub fn split_random(corpus: &Corpus, seed: u64, ratio: f64) -> SplitResult {
    let ids = sorted_ids(corpus);
    let mut order: Vec<&str> = ids.iter().map(String::as_str).collect();
    order.shuffle(&mut rng_for(seed, &[b"split", b"random"]));
    let n_train = (ratio * ids.len() as f64).floor() as usize;
    let test: BTreeSet<&str> = order[n_train..].iter().copied().collect();
    SplitResult::from_test(&ids, &test, Vec::new(), String::new())
}

pub const MIN_TEMPLATES_PER_CATEGORY: usize = 7;

/// Holds out whole templates per task category. Templates are visited in a
/// seeded order and added to the test side while that brings the running
/// test count closer to `test_fraction` of the episodes seen so far, so the
/// rounding error of one category is carried into the next.
pub fn split_task(corpus: &Corpus, seed: u64, test_fraction: f64) -> Result<SplitResult, SplitError> {
    // category -> template -> episode count
    let mut sizes: BTreeMap<TaskCategory, BTreeMap<&str, usize>> = BTreeMap::new();
    for ep in &corpus.episodes {
        *sizes
            .entry(ep.task_info.category)
            .or_default()
            .entry(ep.task_info.template_id.as_str())
            .or_insert(0) += 1;
    }
    for (cat, templates) in &sizes {
        if templates.len() < MIN_TEMPLATES_PER_CATEGORY {
            return Err(SplitError::Infeasible(format!(
                "category {cat} has {} templates, need at least {MIN_TEMPLATES_PER_CATEGORY}",
                templates.len()
            )));
        }
    }

    let mut held: BTreeSet<&str> = BTreeSet::new();
    let (mut seen, mut in_test) = (0usize, 0usize);
    for (cat, templates) in &sizes {
        let mut order: Vec<(&str, usize)> = templates.iter().map(|(t, n)| (*t, *n)).collect();
        order.shuffle(&mut rng_for(seed, &[b"split", b"task", cat.as_str().as_bytes()]));
        seen += templates.values().sum::<usize>();
        let target = test_fraction * seen as f64;
        let mut picked = 0;
        // the last template always stays in train
        for (template, n) in &order[..order.len() - 1] {
            let gap = (target - in_test as f64).abs();
            let after = (target - (in_test + n) as f64).abs();
            if after < gap {
                held.insert(template);
                in_test += n;
                picked += 1;
            }
        }
        if picked == 0 {
            held.insert(order[0].0);
            in_test += order[0].1;
        }
    }

    let test: BTreeSet<&str> = corpus
        .episodes
        .iter()
        .filter(|e| held.contains(e.task_info.template_id.as_str()))
        .map(|e| e.episode_id.as_str())
        .collect();
    Ok(SplitResult::from_test(
        &sorted_ids(corpus),
        &test,
        held.into_iter().map(str::to_string).collect(),
        String::new(),
    ))
}

/// Test set = exactly the episodes recorded on `device_name`.
pub fn split_device(corpus: &Corpus, device_name: &str) -> Result<SplitResult, SplitError> {
    let test: BTreeSet<&str> = corpus
        .episodes
        .iter()
        .filter(|e| e.device_info.name == device_name)
        .map(|e| e.episode_id.as_str())
        .collect();
    if test.is_empty() {
        return Err(SplitError::Infeasible(format!("no episodes recorded on device {device_name:?}")));
    }
    Ok(SplitResult::from_test(
        &sorted_ids(corpus),
        &test,
        vec![device_name.to_string()],
        String::new(),
    ))
}

/// Allowed distance between the achieved and the target test fraction.
pub const APP_FRACTION_TOLERANCE: f64 = 0.05;

/// Holds out the least-frequent apps of every app category. Starts from
/// `holdout_per_category` apps per category, then moves one category at a
/// time by one app (the move that lands closest to the target, ties in a
/// seeded category order) until the test fraction is within
/// [`APP_FRACTION_TOLERANCE`] of the target or no move helps.
pub fn split_app(
    corpus: &Corpus,
    category_map: &BTreeMap<String, String>,
    holdout_per_category: usize,
    seed: u64,
    target_test_fraction: f64,
) -> Result<SplitResult, SplitError> {
    let mut unmapped: BTreeSet<&str> = BTreeSet::new();
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for ep in &corpus.episodes {
        let apps: BTreeSet<&str> = ep.task_info.apps.iter().map(String::as_str).collect();
        for app in apps {
            if !category_map.contains_key(app) {
                unmapped.insert(app);
            }
            *freq.entry(app).or_insert(0) += 1;
        }
    }
    if !unmapped.is_empty() {
        let list: Vec<&str> = unmapped.into_iter().collect();
        return Err(SplitError::Config(format!("apps missing from the category map: {}", list.join(", "))));
    }

    // per app category: apps used by the corpus, least frequent first
    let mut ranked: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for app in freq.keys() {
        ranked.entry(category_map[*app].as_str()).or_default().push(app);
    }
    for apps in ranked.values_mut() {
        apps.sort_by_key(|a| (freq[a], *a));
    }
    let mut cats: Vec<&str> = ranked.keys().copied().collect();
    cats.shuffle(&mut rng_for(seed, &[b"split", b"app"]));

    // episode app sets with apps as category-local ranks
    let episodes: Vec<Vec<(usize, usize)>> = corpus
        .episodes
        .iter()
        .map(|e| {
            e.task_info
                .apps
                .iter()
                .map(|app| {
                    let cat = category_map[app].as_str();
                    let ci = cats.iter().position(|c| *c == cat).expect("ranked category");
                    let rank = ranked[cat].iter().position(|a| a == app).expect("ranked app");
                    (ci, rank)
                })
                .collect()
        })
        .collect();
    let fraction = |k: &[usize]| {
        let n = episodes.iter().filter(|apps| apps.iter().any(|(c, r)| *r < k[*c])).count();
        n as f64 / episodes.len() as f64
    };

    let mut k: Vec<usize> = cats.iter().map(|c| holdout_per_category.min(ranked[c].len())).collect();
    let mut current = fraction(&k);
    let max_moves = cats.iter().map(|c| ranked[c].len()).sum::<usize>() + 1;
    for _ in 0..max_moves {
        if (current - target_test_fraction).abs() <= APP_FRACTION_TOLERANCE {
            break;
        }
        let grow = current < target_test_fraction;
        let mut best: Option<(usize, f64)> = None;
        for ci in 0..cats.len() {
            let mut next = k.clone();
            if grow && next[ci] < ranked[cats[ci]].len() {
                next[ci] += 1;
            } else if !grow && next[ci] > 0 {
                next[ci] -= 1;
            } else {
                continue;
            }
            let f = fraction(&next);
            let better = best.is_none_or(|(_, b)| (f - target_test_fraction).abs() < (b - target_test_fraction).abs());
            if better {
                best = Some((ci, f));
            }
        }
        match best {
            Some((ci, f)) if (f - target_test_fraction).abs() < (current - target_test_fraction).abs() => {
                if grow {
                    k[ci] += 1;
                } else {
                    k[ci] -= 1;
                }
                current = f;
            }
            _ => break,
        }
    }

    let mut held: BTreeSet<String> = BTreeSet::new();
    for (ci, cat) in cats.iter().enumerate() {
        held.extend(ranked[cat][..k[ci]].iter().map(|a| a.to_string()));
    }
    let test: BTreeSet<&str> = corpus
        .episodes
        .iter()
        .filter(|e| e.task_info.apps.iter().any(|a| held.contains(a)))
        .map(|e| e.episode_id.as_str())
        .collect();
    Ok(SplitResult::from_test(
        &sorted_ids(corpus),
        &test,
        held.into_iter().collect(),
        String::new(),
    ))
}
