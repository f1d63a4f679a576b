//! The `odyssey` command line.
//!
//! Exit codes: 0 on success, 1 when the data fails (validation violations,
//! infeasible split, aborted evaluation, failed gradient check), 2 on a
//! configuration error (bad flags, unknown subcommand). Diagnostics go to
//! standard error; results go to files or standard output. Subcommands that
//! write into `--out` also append one JSON line per phase to `run.log.jsonl`
//! there.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::episode::{validate_structure, Corpus};
use crate::harness::{agent_from_spec, evaluate_offline, wire, HarnessConfig, ImageMode};
use crate::metrics::{build_report, render_report, EvalRecord, GroupKey, InstructionLevel, OverallWeighting, ReportFormat};
use crate::pipeline::annotate::{apply_rewrite, Annotated, Annotator, DEFAULT_LLM_RETRIES};
use crate::pipeline::llm::{HttpBackend, LlmBackend, MockBackend, OverlayMode, DEFAULT_REQUESTS_PER_MINUTE};
use crate::pipeline::prompts::PromptSet;
use crate::pipeline::quality::{quality_check, Judge};
use crate::pipeline::templates::InstructionInstance;
use crate::resampler::{grad_check, token_budget, HistoryStrategy, HistoryTokens, ResamplerParams, DEFAULT_QUERIES};
use crate::splits::{self, SplitSpec, Strategy};
use crate::synth::{corpus_stats, generate_corpus, write_synthetic, GenSpec};

pub const RUN_LOG_FILE: &str = "run.log.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const REPORT_FILE: &str = "report.md";
pub const QUALITY_FILE: &str = "quality.jsonl";

// stdout is for people and pipes: a reader that goes away early (`| head`)
// is not a failure of the command
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(io::stdout().lock(), $($t)*);
    }};
}

fn emit(bytes: &[u8]) -> CmdResult {
    match io::stdout().lock().write_all(bytes) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(data(e)),
        _ => Ok(()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "odyssey", version, about = "Offline evaluation harness and data toolkit for cross-app GUI navigation agents")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (evaluation and annotation).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every episode of a corpus directory.
    Validate(ValidateArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Print corpus statistics as JSON.
    Stats(CorpusArg),
    /// Write train.ids / test.ids for one split strategy.
    Split(SplitArgs),
    /// Teacher-forced evaluation of an agent.
    Eval(EvalArgs),
    /// Aggregate evaluation records into a report.
    Report(ReportArgs),
    /// Fill step annotations through an LLM backend.
    Annotate(AnnotateArgs),
    /// Run the three-criteria quality check.
    Quality(QualityArgs),
    /// Compare analytic and numeric resampler gradients.
    ResamplerCheck(ResamplerArgs),
    /// History token cost of the resampler and of concatenation.
    TokenBudget(BudgetArgs),
    /// Serve a built-in agent over stdin/stdout in the wire protocol.
    Agent(AgentArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArg {
    /// Corpus directory (holds manifest.jsonl).
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub corpus: PathBuf,
    /// Skip the screenshot file existence check.
    #[arg(long)]
    pub no_files: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Probability an episode ends in IMPOSSIBLE.
    #[arg(long)]
    pub impossible_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub corpus: PathBuf,
    /// random, task, device or app.
    #[arg(long)]
    pub strategy: String,
    /// Train fraction for the random split.
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,
    /// Test fraction for the task split.
    #[arg(long, default_value_t = 1.0 / 7.0)]
    pub test_fraction: f64,
    /// Held-out device name for the device split.
    #[arg(long, default_value = "Tablet")]
    pub device: String,
    /// `app,category` CSV for the app split (default: <corpus>/apps.csv).
    #[arg(long)]
    pub category_map: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub holdout_per_category: usize,
    #[arg(long, default_value_t = 0.15)]
    pub target_test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub corpus: PathBuf,
    /// `builtin:oracle`, `builtin:home`, `builtin:perturbed:P[:SEED]`, an
    /// http(s) URL, or a shell command speaking the wire protocol.
    #[arg(long)]
    pub agent: String,
    /// HL or LL.
    #[arg(long, default_value = "HL")]
    pub level: String,
    #[arg(long, default_value_t = crate::harness::DEFAULT_DELTA)]
    pub delta: usize,
    /// Keep only the last N history actions.
    #[arg(long)]
    pub action_window: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    /// Evaluate only the episodes listed in this id file.
    #[arg(long)]
    pub ids: Option<PathBuf>,
    /// Label stored in each record's split field.
    #[arg(long)]
    pub split_label: Option<String>,
    /// Send screenshots base64-encoded instead of as paths.
    #[arg(long)]
    pub inline_images: bool,
    /// Grouping keys of the printed report.
    #[arg(long, default_value = "")]
    pub group_by: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Record files written by `eval`.
    #[arg(required = true)]
    pub records: Vec<PathBuf>,
    #[arg(long, default_value = "")]
    pub group_by: String,
    /// markdown or csv.
    #[arg(long, default_value = "markdown")]
    pub format: String,
    /// pooled or mean: how the Overall row combines groups.
    #[arg(long, default_value = "pooled")]
    pub overall: String,
}

#[derive(Debug, Args)]
pub struct LlmArgs {
    /// Use the deterministic mock backend.
    #[arg(long)]
    pub mock: bool,
    /// Chat endpoint URL (key in ODYSSEY_LLM_KEY).
    #[arg(long)]
    pub llm_url: Option<String>,
    #[arg(long, default_value = "gpt-4o")]
    pub model: String,
    #[arg(long, default_value_t = DEFAULT_REQUESTS_PER_MINUTE)]
    pub rpm: u32,
    #[arg(long, default_value_t = 120_000)]
    pub llm_timeout_ms: u64,
    #[arg(long, default_value_t = DEFAULT_LLM_RETRIES)]
    pub llm_retries: u32,
    /// Directory of prompt files overriding the built-in ones.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub llm: LlmArgs,
    /// text or image.
    #[arg(long, default_value = "text")]
    pub overlay: String,
    /// Rewrite each instruction before annotating.
    #[arg(long)]
    pub rewrite: bool,
    /// Write the prompt files in use to this directory and exit.
    #[arg(long)]
    pub dump_prompts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QualityArgs {
    pub corpus: PathBuf,
    #[command(flatten)]
    pub llm: LlmArgs,
}

#[derive(Debug, Args)]
pub struct ResamplerArgs {
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// History screenshots.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Tokens per screenshot.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long, default_value_t = crate::harness::DEFAULT_DELTA)]
    pub delta: usize,
    #[arg(long, default_value_t = crate::resampler::DEFAULT_TOKENS_PER_IMAGE)]
    pub per_image: usize,
    #[arg(long, default_value_t = DEFAULT_QUERIES)]
    pub queries: usize,
}

#[derive(Debug, Args)]
pub struct AgentArgs {
    /// oracle, home or perturbed:P[:SEED].
    #[arg(long, default_value = "oracle")]
    pub builtin: String,
    /// Corpus the oracle reads gold actions from.
    #[arg(long)]
    pub corpus: PathBuf,
}

/// Why a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1.
    Data(String),
    /// Exit 2.
    Config(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Data(_) => 1,
            Failure::Config(_) => 2,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn data(e: impl ToString) -> Failure {
    Failure::Data(e.to_string())
}

fn config(e: impl ToString) -> Failure {
    Failure::Config(e.to_string())
}

/// Appends phase lines to `<out>/run.log.jsonl` when an output directory is
/// set. Lines hold counts and settings only, never timings, so reruns
/// produce identical logs.
struct RunLog {
    path: Option<PathBuf>,
    command: &'static str,
}

impl RunLog {
    fn new(out: Option<&Path>, command: &'static str) -> Self {
        Self {
            path: out.map(|o| o.join(RUN_LOG_FILE)),
            command,
        }
    }

    fn phase(&self, phase: &str, details: Value) -> CmdResult {
        let Some(path) = &self.path else { return Ok(()) };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
        }
        let line = json!({"command": self.command, "phase": phase, "details": details});
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| data(format!("{}: {e}", path.display())))?;
        writeln!(f, "{line}").map_err(|e| data(format!("{}: {e}", path.display())))
    }

    /// Starts a fresh log for this invocation.
    fn reset(&self) -> CmdResult {
        if let Some(path) = &self.path {
            if path.exists() {
                fs::remove_file(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn load(dir: &Path) -> Result<Corpus, Failure> {
    Corpus::load_dir(dir).map_err(|e| data(format!("{}: {e}", dir.display())))
}

fn require_out(global: &Global, cmd: &str) -> Result<PathBuf, Failure> {
    global
        .out
        .clone()
        .ok_or_else(|| config(format!("{cmd} needs --out")))
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(f) => {
            let (Failure::Data(msg) | Failure::Config(msg)) = &f;
            eprintln!("odyssey: {msg}");
            f.code()
        }
    }
}

pub fn dispatch(cli: &Cli) -> CmdResult {
    let g = &cli.global;
    if g.jobs == 0 {
        return Err(config("--jobs must be at least 1"));
    }
    match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Synth(a) => synth(g, a),
        Command::Stats(a) => stats(a),
        Command::Split(a) => split(g, a),
        Command::Eval(a) => eval(g, a),
        Command::Report(a) => report(a),
        Command::Annotate(a) => annotate(g, a),
        Command::Quality(a) => quality(g, a),
        Command::ResamplerCheck(a) => resampler_check(g, a),
        Command::TokenBudget(a) => token_budget_cmd(a),
        Command::Agent(a) => agent(g, a),
    }
}

fn validate(a: &ValidateArgs) -> CmdResult {
    let corpus = load(&a.corpus)?;
    let root = (!a.no_files).then_some(a.corpus.as_path());
    let mut bad = 0usize;
    for ep in &corpus.episodes {
        for v in validate_structure(ep, root) {
            eprintln!("{}: {v}", ep.episode_id);
            bad += 1;
        }
    }
    say!("{} episodes, {} steps, {bad} violations", corpus.len(), corpus.total_steps());
    if bad > 0 {
        return Err(data(format!("{bad} violations")));
    }
    Ok(())
}

fn synth(g: &Global, a: &SynthArgs) -> CmdResult {
    let out = require_out(g, "synth")?;
    let mut spec = GenSpec::new(a.n, g.seed.unwrap_or(0));
    if let Some(r) = a.impossible_rate {
        spec.impossible_rate = r;
    }
    spec.validate().map_err(config)?;
    let log = RunLog::new(Some(&out), "synth");
    log.reset()?;
    log.phase("config", json!({"n": spec.n_episodes, "seed": spec.seed}))?;
    let corpus = generate_corpus(&spec).map_err(config)?;
    write_synthetic(&corpus, &spec.catalog(), &out).map_err(data)?;
    log.phase("write", json!({"episodes": corpus.len(), "steps": corpus.total_steps()}))?;
    say!("wrote {} episodes ({} steps) to {}", corpus.len(), corpus.total_steps(), out.display());
    Ok(())
}

fn stats(a: &CorpusArg) -> CmdResult {
    let corpus = load(&a.corpus)?;
    let s = serde_json::to_string_pretty(&corpus_stats(&corpus)).map_err(data)?;
    say!("{s}");
    Ok(())
}

fn split(g: &Global, a: &SplitArgs) -> CmdResult {
    let strategy = match a.strategy.as_str() {
        "random" => Strategy::Random { ratio: a.ratio },
        "task" => Strategy::Task {
            test_fraction: a.test_fraction,
        },
        "device" => Strategy::Device {
            device_name: a.device.clone(),
        },
        "app" => {
            let path = a.category_map.clone().unwrap_or_else(|| a.corpus.join("apps.csv"));
            let text = fs::read_to_string(&path).map_err(|e| config(format!("{}: {e}", path.display())))?;
            Strategy::App {
                category_map: splits::parse_category_map(&text).map_err(config)?,
                holdout_per_category: a.holdout_per_category,
                target_test_fraction: a.target_test_fraction,
            }
        }
        other => return Err(config(format!("unknown split strategy {other:?}"))),
    };
    let spec = SplitSpec::new(strategy, g.seed);
    let corpus = load(&a.corpus)?;
    let result = splits::split(&corpus, &spec).map_err(|e| match e {
        splits::SplitError::Config(_) => config(e),
        _ => data(e),
    })?;
    let out = g
        .out
        .clone()
        .unwrap_or_else(|| a.corpus.join("splits").join(&a.strategy));
    result.write(&out).map_err(data)?;
    let log = RunLog::new(Some(&out), "split");
    log.reset()?;
    log.phase(
        "split",
        json!({"provenance": result.provenance, "train": result.train.len(), "test": result.test.len()}),
    )?;
    say!("{result}");
    Ok(())
}

fn eval(g: &Global, a: &EvalArgs) -> CmdResult {
    let level: InstructionLevel = a.level.parse().map_err(config)?;
    let group_by = GroupKey::parse_list(&a.group_by).map_err(config)?;
    let config_ = HarnessConfig {
        delta: a.delta,
        level,
        action_window: a.action_window,
        jobs: g.jobs,
        timeout: Duration::from_millis(a.timeout_ms),
        retries: a.retries,
        images: if a.inline_images {
            ImageMode::Inline
        } else {
            ImageMode::Path
        },
        split_label: a.split_label.clone(),
    };
    config_.check().map_err(config)?;
    let mut corpus = load(&a.corpus)?;
    if let Some(ids) = &a.ids {
        let wanted: BTreeSet<String> = splits::read_ids(ids).map_err(config)?.into_iter().collect();
        let missing: Vec<&String> = wanted.iter().filter(|id| corpus.get(id).is_none()).collect();
        if !missing.is_empty() {
            return Err(data(format!("{} listed ids are not in the corpus, e.g. {}", missing.len(), missing[0])));
        }
        corpus = corpus.subset(&wanted);
    }
    let agent = agent_from_spec(&a.agent, &corpus, &config_).map_err(config)?;
    let log = RunLog::new(g.out.as_deref(), "eval");
    log.reset()?;
    log.phase(
        "config",
        json!({"agent": a.agent, "level": level.as_str(), "delta": a.delta, "episodes": corpus.len(), "steps": corpus.total_steps()}),
    )?;

    let (records, failures, aborted) = match evaluate_offline(&corpus, agent.as_ref(), &config_) {
        Ok(run) => (run.records, run.failures, None),
        Err(abort) => (abort.partial, abort.failures, Some(abort.error.to_string())),
    };
    drop(agent);
    log.phase(
        "evaluate",
        json!({
            "records": records.len(),
            "timeouts": failures.timeouts,
            "malformed": failures.malformed,
            "refused": failures.refused,
            "retried": failures.retried,
            "aborted": aborted,
        }),
    )?;
    if let Some(out) = &g.out {
        let mut lines = Vec::new();
        for r in &records {
            serde_json::to_writer(&mut lines, r).map_err(data)?;
            lines.push(b'\n');
        }
        write_file(&out.join(RECORDS_FILE), &lines)?;
    }
    eprintln!("agent failures: {failures}");
    if let Some(err) = aborted {
        return Err(data(format!("evaluation aborted after {} records: {err}", records.len())));
    }
    let report = build_report(&records, &group_by, OverallWeighting::Pooled).map_err(data)?;
    let rendered = render_report(&report, ReportFormat::Markdown);
    if let Some(out) = &g.out {
        write_file(&out.join(REPORT_FILE), &rendered)?;
    }
    emit(&rendered)?;
    log.phase(
        "report",
        json!({"ams": report.overall_ams(), "sr": report.overall_sr()}),
    )?;
    Ok(())
}

/// Reads JSON-lines evaluation records.
pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1)))
        .collect()
}

fn report(a: &ReportArgs) -> CmdResult {
    let group_by = GroupKey::parse_list(&a.group_by).map_err(config)?;
    let format: ReportFormat = a.format.parse().map_err(config)?;
    let weighting = match a.overall.as_str() {
        "pooled" => OverallWeighting::Pooled,
        "mean" => OverallWeighting::MeanOfGroups,
        other => return Err(config(format!("unknown --overall {other:?} (pooled or mean)"))),
    };
    let mut records = Vec::new();
    for path in &a.records {
        records.extend(read_records(path).map_err(data)?);
    }
    let report = build_report(&records, &group_by, weighting).map_err(data)?;
    emit(&render_report(&report, format))
}

fn backend(a: &LlmArgs) -> Result<Box<dyn LlmBackend>, Failure> {
    match (&a.llm_url, a.mock) {
        (Some(_), true) => Err(config("--mock and --llm-url are exclusive")),
        (None, true) => Ok(Box::new(MockBackend::new())),
        (Some(url), false) => Ok(Box::new(HttpBackend::new(
            url.clone(),
            a.model.clone(),
            Duration::from_millis(a.llm_timeout_ms),
            a.rpm,
        ))),
        (None, false) => Err(config("choose a backend: --mock or --llm-url URL")),
    }
}

fn prompts(a: &LlmArgs) -> Result<PromptSet, Failure> {
    match &a.prompts {
        Some(dir) => PromptSet::load_dir(dir).map_err(config),
        None => Ok(PromptSet::default()),
    }
}

/// Runs `f` over `0..n` on `jobs` threads and returns results in index
/// order.
fn parallel<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.min(n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                *slots[i].lock().expect("slot") = Some(f(i));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot").expect("filled"))
        .collect()
}

fn annotate(g: &Global, a: &AnnotateArgs) -> CmdResult {
    let prompt_set = prompts(&a.llm)?;
    if let Some(dir) = &a.dump_prompts {
        return prompt_set.write_dir(dir).map_err(data);
    }
    let overlay = match a.overlay.as_str() {
        "text" => OverlayMode::Text,
        "image" => OverlayMode::Image,
        other => return Err(config(format!("unknown --overlay {other:?} (text or image)"))),
    };
    let out = require_out(g, "annotate")?;
    if out == a.input {
        return Err(config("--out must differ from --in"));
    }
    let llm = backend(&a.llm)?;
    let corpus = load(&a.input)?;
    let mut annotator = Annotator::new(llm.as_ref()).with_root(&a.input);
    annotator.prompts = prompt_set;
    annotator.retries = a.llm.llm_retries;
    annotator.overlay = overlay;
    annotator.overlay_dir = Some(out.join("overlays"));

    let log = RunLog::new(Some(&out), "annotate");
    log.reset()?;
    log.phase("config", json!({"episodes": corpus.len(), "overlay": overlay.as_str(), "rewrite": a.rewrite}))?;

    let mut warnings = 0usize;
    let results: Vec<(Annotated, Option<String>)> = parallel(corpus.len(), g.jobs, |i| {
        let mut ep = corpus.episodes[i].clone();
        let mut warning = None;
        if a.rewrite {
            let instance = InstructionInstance {
                template_id: ep.task_info.template_id.clone(),
                instruction: ep.task_info.high_level_instruction.clone(),
                item: None,
                apps: ep.task_info.apps.clone(),
            };
            match annotator.rewrite_instruction(&instance) {
                Ok(rw) => {
                    warning = rw.warning.clone();
                    apply_rewrite(&mut ep, &rw);
                }
                Err(e) => warning = Some(e.to_string()),
            }
        }
        (annotator.annotate_episode(&ep), warning)
    });

    let mut episodes = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    let (mut text_overlays, mut image_overlays) = (0, 0);
    for (ann, warning) in results {
        if let Some(w) = warning {
            eprintln!("{}: {w}", ann.episode.episode_id);
            warnings += 1;
        }
        if let Some(f) = &ann.report.failure {
            eprintln!("{}: {f}", ann.episode.episode_id);
            failed.push(ann.episode.episode_id.clone());
        }
        text_overlays += ann.report.text_overlays;
        image_overlays += ann.report.image_overlays;
        episodes.push(ann.episode);
    }
    let annotated = Corpus::new(episodes).map_err(data)?;
    annotated.write_dir(&out).map_err(data)?;
    let screenshots = carry_screenshots(&annotated, &a.input, &out)?;
    log.phase(
        "annotate",
        json!({
            "episodes": annotated.len(),
            "failed_episodes": failed,
            "rewrite_warnings": warnings,
            "text_overlays": text_overlays,
            "image_overlays": image_overlays,
            "screenshots_carried": screenshots,
        }),
    )?;
    say!(
        "annotated {} of {} episodes into {} ({screenshots} screenshots carried over)",
        annotated.len() - failed.len(),
        annotated.len(),
        out.display()
    );
    if !failed.is_empty() {
        return Err(data(format!("{} episodes only partly annotated", failed.len())));
    }
    Ok(())
}


/// Makes `out` a self-contained corpus: every relative screenshot under
/// `input` is hard-linked (or copied when linking fails) to the same path.
fn carry_screenshots(corpus: &Corpus, input: &Path, out: &Path) -> Result<usize, Failure> {
    let mut seen = BTreeSet::new();
    for step in corpus.episodes.iter().flat_map(|e| &e.steps) {
        let rel = Path::new(&step.screenshot);
        if rel.is_absolute() || !seen.insert(rel.to_path_buf()) {
            continue;
        }
        let (src, dst) = (input.join(rel), out.join(rel));
        if !src.exists() || dst.exists() {
            continue;
        }
        if let Some(dir) = dst.parent() {
            fs::create_dir_all(dir).map_err(data)?;
        }
        if fs::hard_link(&src, &dst).is_err() {
            fs::copy(&src, &dst).map_err(data)?;
        }
    }
    Ok(seen.len())
}
fn quality(g: &Global, a: &QualityArgs) -> CmdResult {
    let prompt_set = prompts(&a.llm)?;
    let llm = if a.llm.mock || a.llm.llm_url.is_some() {
        Some(backend(&a.llm)?)
    } else {
        None
    };
    let judge = llm.as_ref().map(|l| Judge {
        llm: l.as_ref(),
        prompts: &prompt_set,
        retries: a.llm.llm_retries,
    });
    let corpus = load(&a.corpus)?;
    let verdicts = parallel(corpus.len(), g.jobs, |i| {
        quality_check(&corpus.episodes[i], Some(&a.corpus), judge.as_ref())
    });
    let mut lines = Vec::new();
    let mut rejected = 0;
    for v in &verdicts {
        if !v.accepted() {
            eprintln!("{v}");
            rejected += 1;
        }
        serde_json::to_writer(&mut lines, v).map_err(data)?;
        lines.push(b'\n');
    }
    match &g.out {
        Some(out) => {
            write_file(&out.join(QUALITY_FILE), &lines)?;
            let log = RunLog::new(Some(out), "quality");
            log.reset()?;
            log.phase("check", json!({"episodes": verdicts.len(), "rejected": rejected}))?;
        }
        None => emit(&lines)?,
    }
    eprintln!("{} episodes, {rejected} rejected", verdicts.len());
    if rejected > 0 {
        return Err(data(format!("{rejected} episodes rejected")));
    }
    Ok(())
}

fn resampler_check(g: &Global, a: &ResamplerArgs) -> CmdResult {
    if a.d == 0 || a.m == 0 || a.k == 0 || a.n == 0 {
        return Err(config("--d, --m, --k and --n must be positive"));
    }
    if !(a.eps > 0.0) {
        return Err(config("--eps must be positive"));
    }
    let seed = g.seed.unwrap_or(0);
    let params = ResamplerParams::init(a.m, a.d, Some(a.k), seed);
    let history = HistoryTokens::random(a.k, a.n, a.d, seed);
    let check = grad_check(&params, &history, a.eps).map_err(data)?;
    for (name, err) in &check.per_param {
        say!("{name:>10}  {err:.3e}");
    }
    let pass = check.max_rel_error < a.tol;
    say!(
        "max relative error {:.3e} (tolerance {:.0e}): {}",
        check.max_rel_error,
        a.tol,
        if pass { "PASS" } else { "FAIL" }
    );
    if !pass {
        return Err(data("gradient check failed"));
    }
    Ok(())
}

fn token_budget_cmd(a: &BudgetArgs) -> CmdResult {
    let r = token_budget(a.delta, a.per_image, HistoryStrategy::Resampler { queries: a.queries });
    let c = token_budget(a.delta, a.per_image, HistoryStrategy::Concat);
    say!("resampler: {r}");
    say!("concat: {c}");
    Ok(())
}

fn agent(g: &Global, a: &AgentArgs) -> CmdResult {
    let corpus = load(&a.corpus)?;
    let config_ = HarnessConfig {
        jobs: g.jobs,
        ..HarnessConfig::default()
    };
    let agent = agent_from_spec(&format!("builtin:{}", a.builtin), &corpus, &config_).map_err(config)?;
    let stdin = io::stdin();
    let stdout = io::stdout();
    wire::serve_lines(agent.as_ref(), stdin.lock(), BufWriter::new(stdout.lock())).map_err(data)
}
