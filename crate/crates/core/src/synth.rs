//! Seeded generator of synthetic, structurally valid corpora.
//!
//! Every generated episode has random positional actions inside the device
//! bounds, scrolls with distinct endpoints, bounding boxes around every
//! click/long-press target, template ids for the task split and apps drawn
//! from a 25-category catalog for the app split. Generation is a pure
//! function of the [`GenSpec`]: each episode draws from its own RNG stream
//! derived from `(seed, index)`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use serde::Serialize;
use thiserror::Error;

use crate::episode::{
    Action, ActionKind, BoundingBox, Corpus, CorpusError, DeviceInfo, Episode, Point, Step,
    TaskCategory, TaskInfo,
};
use crate::pipeline::templates::InstructionTemplate;
use crate::seed::rng_for;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation spec: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub weight: f64,
}

impl DeviceSpec {
    pub fn new(name: &str, width: u32, height: u32, weight: f64) -> Self {
        Self {
            name: name.into(),
            width,
            height,
            weight,
        }
    }
}

/// The six recording devices; the tablet is named `Tablet` so the device
/// split finds it by default.
pub fn default_devices() -> Vec<DeviceSpec> {
    vec![
        DeviceSpec::new("Pixel 7 Pro", 1440, 3120, 1.0),
        DeviceSpec::new("Pixel 8 Pro", 1344, 2992, 1.0),
        DeviceSpec::new("Small Phone", 720, 1280, 1.0),
        DeviceSpec::new("Medium Phone", 1080, 2400, 1.0),
        DeviceSpec::new("Pixel Fold", 2208, 1840, 1.0),
        DeviceSpec::new("Tablet", 2560, 1600, 1.0),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub n_episodes: usize,
    pub seed: u64,
    pub devices: Vec<DeviceSpec>,
    pub category_weights: BTreeMap<TaskCategory, f64>,
    pub template_count: usize,
    pub min_len: u32,
    pub max_len: u32,
    pub mean_len: f64,
    /// Weights over the non-terminal kinds.
    pub action_mix: BTreeMap<ActionKind, f64>,
    /// Probability an episode ends in IMPOSSIBLE instead of COMPLETE.
    pub impossible_rate: f64,
    pub app_categories: usize,
    pub app_count: usize,
    /// Zipf exponent of app popularity within a category.
    pub app_skew: f64,
}

impl GenSpec {
    pub fn new(n_episodes: usize, seed: u64) -> Self {
        Self {
            n_episodes,
            seed,
            devices: default_devices(),
            category_weights: TaskCategory::ALL.iter().map(|c| (*c, 1.0)).collect(),
            template_count: 91,
            min_len: 5,
            max_len: 30,
            mean_len: 15.3,
            action_mix: BTreeMap::from([
                (ActionKind::Click, 0.55),
                (ActionKind::LongPress, 0.03),
                (ActionKind::Scroll, 0.12),
                (ActionKind::Type, 0.08),
                (ActionKind::Home, 0.08),
                (ActionKind::Back, 0.10),
                (ActionKind::Recent, 0.04),
            ]),
            impossible_rate: 0.05,
            app_categories: 25,
            app_count: 212,
            app_skew: 1.2,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.to_string()));
        if self.min_len < 2 {
            return bad("min length must be at least 2 (one action plus the terminal step)");
        }
        if self.max_len < self.min_len {
            return bad("max length below min length");
        }
        if !(f64::from(self.min_len)..=f64::from(self.max_len)).contains(&self.mean_len) {
            return bad("mean length outside [min, max]");
        }
        if self.devices.is_empty() || !weights_ok(self.devices.iter().map(|d| d.weight)) {
            return bad("device weights must be non-negative and not all zero");
        }
        if self.devices.iter().any(|d| d.width < 2 || d.height < 2) {
            return bad("device resolution too small");
        }
        if !weights_ok(self.category_weights.values().copied()) {
            return bad("category weights must be non-negative and not all zero");
        }
        if self.action_mix.keys().any(|k| k.is_terminal()) {
            return bad("action mix may not contain terminal kinds");
        }
        if !weights_ok(self.action_mix.values().copied()) {
            return bad("action mix weights must be non-negative and not all zero");
        }
        if !(0.0..=1.0).contains(&self.impossible_rate) {
            return bad("impossible rate outside [0, 1]");
        }
        let active = self.category_weights.values().filter(|w| **w > 0.0).count();
        if self.template_count < active {
            return bad("need at least one template per weighted category");
        }
        if self.app_categories == 0 || self.app_count < self.app_categories * 3 {
            return bad("need at least three apps per app category");
        }
        Ok(())
    }

    pub fn catalog(&self) -> AppCatalog {
        AppCatalog::build(self.app_categories, self.app_count)
    }
}

fn weights_ok(ws: impl Iterator<Item = f64>) -> bool {
    let mut total = 0.0;
    for w in ws {
        if !(w >= 0.0 && w.is_finite()) {
            return false;
        }
        total += w;
    }
    total > 0.0
}

const APP_CATEGORY_NAMES: [&str; 25] = [
    "Video", "Music", "Reading", "Shopping", "Social", "Notes", "Calendar", "Browser", "Maps",
    "Weather", "Photos", "Camera", "Email", "Messaging", "Podcast", "News", "Travel", "Food",
    "Finance", "Fitness", "Productivity", "Tools", "Education", "Files", "Settings",
];

/// App categories (by index into the catalog) each task family draws from.
fn preferred_app_categories(category: TaskCategory) -> &'static [usize] {
    match category {
        TaskCategory::GeneralTool => &[24, 21, 23, 7, 6, 9, 8, 12],
        TaskCategory::InformationManagement => &[7, 5, 6, 15, 12, 20, 2, 22],
        TaskCategory::WebShopping => &[3, 7, 18, 5, 13, 17, 16],
        TaskCategory::MediaEntertainment => &[0, 1, 14, 2, 20, 5, 4],
        TaskCategory::SocialSharing => &[4, 11, 10, 13, 0, 12, 1],
        TaskCategory::MultiApps => &[17, 16, 19, 3, 7, 5, 8, 18, 22, 6],
    }
}

fn phrase(category: TaskCategory, variant: usize) -> &'static str {
    const GENERAL: [&str; 3] = [
        "Open {app1} to change the {item} setting, then check it from {app2}",
        "Use {app1} to look up {item} and save the answer with {app2}",
        "Adjust {item} in {app1} and confirm the change in {app2}",
    ];
    const INFO: [&str; 3] = [
        "Search for {item} in {app1} and record the key facts in {app2}",
        "Find the latest on {item} with {app1} and write a summary in {app2}",
        "Look up {item} on {app1} and add a reminder about it in {app2}",
    ];
    const SHOP: [&str; 3] = [
        "Find {item} on {app1} and compare its price on {app2}",
        "Search {app1} for {item}, then add the cheapest one to the cart in {app2}",
        "Check reviews of {item} on {app1} and buy it on {app2}",
    ];
    const MEDIA: [&str; 3] = [
        "Listen to something about {item} for beginners on {app1} and create a to-do list in {app2}",
        "Watch a video on {item} in {app1} and add it to a playlist in {app2}",
        "Play music for {item} on {app1} and note the title in {app2}",
    ];
    const SOCIAL: [&str; 3] = [
        "Take a photo of {item} with {app1} and share it on {app2}",
        "Pick a picture of {item} in {app1} and post it to {app2}",
        "Record a short clip about {item} with {app1} and send it via {app2}",
    ];
    const MULTI: [&str; 3] = [
        "Look up a recipe for {item} in {app1}, note the ingredients in {app2} and order them on {app3}",
        "Plan a trip about {item} with {app1}, save the plan in {app2} and share it on {app3}",
        "Find {item} on {app1}, record it in {app2} and schedule it with {app3}",
    ];
    let set = match category {
        TaskCategory::GeneralTool => &GENERAL,
        TaskCategory::InformationManagement => &INFO,
        TaskCategory::WebShopping => &SHOP,
        TaskCategory::MediaEntertainment => &MEDIA,
        TaskCategory::SocialSharing => &SOCIAL,
        TaskCategory::MultiApps => &MULTI,
    };
    set[variant % set.len()]
}

const ITEMS: [&str; 32] = [
    "yoga", "meditation", "digital marketing", "running shoes", "coffee", "the weekend weather",
    "a birthday gift", "jazz", "pasta", "hiking trails", "electric cars", "a desk lamp",
    "photography", "budget travel", "chess", "gardening", "sushi", "a wireless mouse",
    "the marathon", "piano lessons", "camping gear", "a sci-fi novel", "tea", "basketball",
    "a city tour", "street food", "a phone case", "the museum", "sunsets", "dark mode",
    "font size", "battery saver",
];

/// The app universe: `count` apps spread over `categories` app categories,
/// each with a Zipf popularity rank inside its category.
#[derive(Debug, Clone, PartialEq)]
pub struct AppCatalog {
    pub categories: Vec<String>,
    /// Apps per category, most popular first.
    pub apps: Vec<Vec<String>>,
}

impl AppCatalog {
    pub fn build(categories: usize, count: usize) -> Self {
        let names: Vec<String> = (0..categories)
            .map(|c| match APP_CATEGORY_NAMES.get(c) {
                Some(n) => n.to_string(),
                None => format!("Category{c:02}"),
            })
            .collect();
        let base = count / categories;
        let extra = count % categories;
        let apps = names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let n = base + usize::from(c < extra);
                (1..=n).map(|k| format!("{name} {k}")).collect()
            })
            .collect();
        Self {
            categories: names,
            apps,
        }
    }

    /// `app -> app category` map consumed by the app split.
    pub fn category_map(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for (cat, apps) in self.categories.iter().zip(&self.apps) {
            for app in apps {
                out.insert(app.clone(), cat.clone());
            }
        }
        out
    }

    /// CSV with an `app,category` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("app,category\n");
        for (app, cat) in self.category_map() {
            out.push_str(&format!("{app},{cat}\n"));
        }
        out
    }
}

struct Template {
    inner: InstructionTemplate,
    /// Role -> app category index.
    roles: Vec<(String, usize)>,
}

fn build_templates(spec: &GenSpec, catalog: &AppCatalog) -> BTreeMap<TaskCategory, Vec<Template>> {
    let weighted: Vec<(TaskCategory, f64)> = spec
        .category_weights
        .iter()
        .filter(|(_, w)| **w > 0.0)
        .map(|(c, w)| (*c, *w))
        .collect();
    let total: f64 = weighted.iter().map(|(_, w)| w).sum();

    // largest-remainder apportionment of the template pool
    let mut counts: Vec<(TaskCategory, usize, f64)> = weighted
        .iter()
        .map(|(c, w)| {
            let share = spec.template_count as f64 * w / total;
            (*c, share.floor() as usize, share - share.floor())
        })
        .collect();
    let mut left = spec.template_count - counts.iter().map(|c| c.1).sum::<usize>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|a, b| counts[*b].2.total_cmp(&counts[*a].2).then(a.cmp(b)));
    for i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[*i].1 += 1;
        left -= 1;
    }
    for c in &mut counts {
        c.1 = c.1.max(1);
    }

    let mut rng = rng_for(spec.seed, &[b"templates"]);
    let mut next_id = 1;
    let mut out = BTreeMap::new();
    for (category, n, _) in counts {
        let mut list = Vec::with_capacity(n);
        let prefs: Vec<usize> = preferred_app_categories(category)
            .iter()
            .copied()
            .filter(|c| *c < catalog.categories.len())
            .collect();
        let prefs = if prefs.len() >= 3 {
            prefs
        } else {
            (0..catalog.categories.len()).collect()
        };
        for v in 0..n {
            let text = phrase(category, v);
            let n_roles = if category == TaskCategory::MultiApps { 3 } else { 2 };
            let picked: Vec<usize> = prefs.choose_multiple(&mut rng, n_roles).copied().collect();
            let roles: Vec<(String, usize)> = picked
                .iter()
                .enumerate()
                .map(|(r, c)| (format!("app{}", r + 1), *c))
                .collect();
            let n_items = rng.random_range(4..=8);
            let item_pool = ITEMS
                .choose_multiple(&mut rng, n_items)
                .map(|s| s.to_string())
                .collect();
            let inner = InstructionTemplate {
                template_id: format!("T{next_id:03}"),
                text: text.to_string(),
                item_pool,
                app_pool: roles
                    .iter()
                    .map(|(role, c)| (role.clone(), catalog.apps[*c].clone()))
                    .collect(),
                category,
            };
            next_id += 1;
            list.push(Template { inner, roles });
        }
        out.insert(category, list);
    }
    out
}

fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    (1..=n).map(|k| 1.0 / (k as f64).powf(s)).collect()
}

fn random_point(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Point {
    Point::new(rng.random_range(0..w), rng.random_range(0..h))
}

fn bbox_around(rng: &mut ChaCha8Rng, p: Point, w: u32, h: u32) -> BoundingBox {
    let side = |rng: &mut ChaCha8Rng, dim: u32| -> u32 {
        ((rng.random_range(0.05..=0.15) * f64::from(dim)).round() as u32).max(1)
    };
    let sx = side(rng, w);
    let sy = side(rng, h);
    let min_x = p.x.saturating_sub(rng.random_range(0..=sx));
    let min_y = p.y.saturating_sub(rng.random_range(0..=sy));
    let max_x = (min_x + sx).min(w - 1).max(p.x);
    let max_y = (min_y + sy).min(h - 1).max(p.y);
    BoundingBox::new(Point::new(min_x, min_y), Point::new(max_x, max_y))
}

fn scroll(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Action {
    let frac = |rng: &mut ChaCha8Rng, lo: f64, hi: f64, dim: u32| -> u32 {
        ((rng.random_range(lo..hi) * f64::from(dim)) as u32).min(dim - 1)
    };
    let roll: f64 = rng.random();
    // finger moves up / down / left / right
    let (pos1, pos2) = if roll < 0.45 {
        let x = frac(rng, 0.2, 0.8, w);
        (
            Point::new(x, frac(rng, 0.6, 0.9, h)),
            Point::new(x, frac(rng, 0.1, 0.4, h)),
        )
    } else if roll < 0.75 {
        let x = frac(rng, 0.2, 0.8, w);
        (
            Point::new(x, frac(rng, 0.1, 0.4, h)),
            Point::new(x, frac(rng, 0.6, 0.9, h)),
        )
    } else if roll < 0.875 {
        let y = frac(rng, 0.2, 0.8, h);
        (
            Point::new(frac(rng, 0.6, 0.9, w), y),
            Point::new(frac(rng, 0.1, 0.4, w), y),
        )
    } else {
        let y = frac(rng, 0.2, 0.8, h);
        (
            Point::new(frac(rng, 0.1, 0.4, w), y),
            Point::new(frac(rng, 0.6, 0.9, w), y),
        )
    };
    Action::Scroll { pos1, pos2 }
}

fn low_level_for(action: &Action) -> String {
    match action {
        Action::Click { pos1 } => format!("Tap the element at {pos1}"),
        Action::LongPress { pos1 } => format!("Press and hold the element at {pos1}"),
        Action::Scroll { pos1, pos2 } => format!("Swipe from {pos1} to {pos2}"),
        Action::Type { text } => format!("Type \"{text}\""),
        Action::Complete => "The task is done".into(),
        Action::Impossible => "Give up: the task cannot be finished".into(),
        Action::Home => "Go to the home screen".into(),
        Action::Back => "Go back to the previous screen".into(),
        Action::Recent => "Open the recent apps view".into(),
    }
}

struct Prepared<'a> {
    spec: &'a GenSpec,
    catalog: AppCatalog,
    templates: BTreeMap<TaskCategory, Vec<Template>>,
    categories: Vec<TaskCategory>,
    category_dist: WeightedIndex<f64>,
    device_dist: WeightedIndex<f64>,
    kinds: Vec<ActionKind>,
    kind_dist: WeightedIndex<f64>,
    app_dists: Vec<WeightedIndex<f64>>,
    length: Binomial,
}

impl<'a> Prepared<'a> {
    fn new(spec: &'a GenSpec) -> Result<Self, GenError> {
        spec.validate()?;
        let cfg = |e: &dyn std::fmt::Display| GenError::Config(e.to_string());
        let catalog = spec.catalog();
        let templates = build_templates(spec, &catalog);
        let categories: Vec<TaskCategory> = templates.keys().copied().collect();
        let category_dist =
            WeightedIndex::new(categories.iter().map(|c| spec.category_weights[c])).map_err(|e| cfg(&e))?;
        let device_dist =
            WeightedIndex::new(spec.devices.iter().map(|d| d.weight)).map_err(|e| cfg(&e))?;
        let kinds: Vec<ActionKind> = spec.action_mix.keys().copied().collect();
        let kind_dist = WeightedIndex::new(spec.action_mix.values().copied()).map_err(|e| cfg(&e))?;
        let app_dists = catalog
            .apps
            .iter()
            .map(|apps| WeightedIndex::new(zipf_weights(apps.len(), spec.app_skew)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| cfg(&e))?;
        let span = spec.max_len - spec.min_len;
        let p = if span == 0 {
            0.0
        } else {
            (spec.mean_len - f64::from(spec.min_len)) / f64::from(span)
        };
        let length = Binomial::new(u64::from(span), p).map_err(|e| cfg(&e))?;
        Ok(Self {
            spec,
            catalog,
            templates,
            categories,
            category_dist,
            device_dist,
            kinds,
            kind_dist,
            app_dists,
            length,
        })
    }

    fn episode(&self, index: usize) -> Episode {
        let spec = self.spec;
        let mut rng = rng_for(spec.seed, &[b"episode", &(index as u64).to_le_bytes()]);
        let episode_id = format!("syn-{:x}-{index:06}", spec.seed);

        let category = self.categories[self.category_dist.sample(&mut rng)];
        let template = self.templates[&category]
            .choose(&mut rng)
            .expect("every weighted category has a template");
        let dev = &spec.devices[self.device_dist.sample(&mut rng)];
        let (w, h) = (dev.width, dev.height);

        let item = template.inner.item_pool.choose(&mut rng).cloned();
        let mut bound = BTreeMap::new();
        let mut apps = Vec::new();
        for (role, cat) in &template.roles {
            let app = self.catalog.apps[*cat][self.app_dists[*cat].sample(&mut rng)].clone();
            bound.insert(role.clone(), app.clone());
            apps.push(app);
        }
        let instruction = template.inner.render(item.as_deref(), &bound);

        let t_len = spec.min_len + self.length.sample(&mut rng) as u32;
        let mut steps = Vec::with_capacity(t_len as usize);
        for t in 1..=t_len {
            let screenshot = format!("screenshots/{episode_id}/{t}.png");
            let mut bbox = None;
            let mut notes = None;
            let action = if t == t_len {
                if rng.random_bool(spec.impossible_rate) {
                    notes = Some("The required content is not available in the app".to_string());
                    Action::Impossible
                } else {
                    Action::Complete
                }
            } else {
                match self.kinds[self.kind_dist.sample(&mut rng)] {
                    kind @ (ActionKind::Click | ActionKind::LongPress) => {
                        let pos1 = random_point(&mut rng, w, h);
                        bbox = Some(bbox_around(&mut rng, pos1, w, h));
                        if kind == ActionKind::Click {
                            Action::Click { pos1 }
                        } else {
                            Action::LongPress { pos1 }
                        }
                    }
                    ActionKind::Scroll => scroll(&mut rng, w, h),
                    ActionKind::Type => Action::Type {
                        text: item.clone().unwrap_or_else(|| ITEMS.choose(&mut rng).unwrap().to_string()),
                    },
                    other => Action::bare(other).expect("non-positional kind"),
                }
            };
            let mut step = Step::new(t, screenshot, action);
            step.low_level_instruction = Some(low_level_for(&step.action));
            step.bbox = bbox;
            step.notes = notes;
            steps.push(step);
        }

        Episode {
            episode_id,
            device_info: DeviceInfo::new(dev.name.clone(), w, h),
            task_info: TaskInfo {
                category,
                apps,
                high_level_instruction: instruction,
                template_id: template.inner.template_id.clone(),
                extra: Default::default(),
            },
            step_length: t_len,
            steps,
        }
    }
}

/// Generates `spec.n_episodes` valid episodes, deterministically per seed.
pub fn generate_corpus(spec: &GenSpec) -> Result<Corpus, GenError> {
    let prepared = Prepared::new(spec)?;
    let episodes = (0..spec.n_episodes).map(|i| prepared.episode(i)).collect();
    Ok(Corpus::new(episodes)?)
}

/// The templates a spec generates from, in id order.
pub fn generated_templates(spec: &GenSpec) -> Result<Vec<InstructionTemplate>, GenError> {
    let prepared = Prepared::new(spec)?;
    let mut out: Vec<InstructionTemplate> = prepared
        .templates
        .into_values()
        .flatten()
        .map(|t| t.inner)
        .collect();
    out.sort_by(|a, b| a.template_id.cmp(&b.template_id));
    Ok(out)
}

/// Writes the corpus (episodes + manifest), a zero-byte placeholder for
/// every screenshot reference, and `apps.csv` with the app category map.
pub fn write_synthetic(corpus: &Corpus, catalog: &AppCatalog, dir: &Path) -> Result<(), GenError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| GenError::Io { path, source }
    };
    corpus.write_dir(dir)?;
    for ep in &corpus.episodes {
        for step in &ep.steps {
            let path = dir.join(&step.screenshot);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            fs::write(&path, b"").map_err(io_err(&path))?;
        }
    }
    let apps = dir.join("apps.csv");
    fs::write(&apps, catalog.to_csv()).map_err(io_err(&apps))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub n_episodes: usize,
    pub n_steps: usize,
    pub per_category: BTreeMap<TaskCategory, usize>,
    pub per_device: BTreeMap<String, usize>,
    /// Episode length -> number of episodes.
    pub length_histogram: BTreeMap<u32, usize>,
    /// App -> number of episodes using it.
    pub app_frequency: BTreeMap<String, usize>,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut length_histogram = BTreeMap::new();
    let mut app_frequency = BTreeMap::new();
    for ep in &corpus.episodes {
        *length_histogram.entry(ep.steps.len() as u32).or_insert(0) += 1;
        let mut seen: Vec<&String> = ep.task_info.apps.iter().collect();
        seen.sort();
        seen.dedup();
        for app in seen {
            *app_frequency.entry(app.clone()).or_insert(0) += 1;
        }
    }
    CorpusStats {
        n_episodes: corpus.len(),
        n_steps: corpus.total_steps(),
        per_category: corpus.category_counts(),
        per_device: corpus.device_counts(),
        length_histogram,
        app_frequency,
    }
}
