//! Acceptance criteria. Runs every criterion, prints one PASS/FAIL line
//! each, and exits non-zero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use odyssey::episode::{serialize_episode, parse_episode, validate_structure, Rule};
use odyssey::harness::{build_context, evaluate_offline, HarnessConfig, PerturbedAgent};
use odyssey::matching::{anls, match_positional, match_step, MatchReason};
use odyssey::metrics::{ams, success_rate, EvalRecord};
use odyssey::pipeline::{Annotator, LlmRequest, MockBackend};
use odyssey::resampler::{
    attention_weights, grad_check, resample, token_budget, HistoryStrategy, HistoryTokens, Matrix, ResamplerParams,
};
use odyssey::splits::{self, split_app, split_device, split_random, split_task, SplitResult, SplitSpec, Strategy};
use odyssey::synth::{generate_corpus, GenSpec};
use odyssey::{
    Action, BoundingBox, Corpus, DeviceInfo, Episode, InstructionLevel, Point, SemanticAnnotation, Step, TaskCategory,
    TaskInfo,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_odyssey")
}

fn odyssey(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "odyssey {args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read_records(path: &Path) -> Vec<EvalRecord> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn oracle_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    let out = dir.path().join("eval");
    let (c, o) = (corpus.to_str().unwrap(), out.to_str().unwrap());
    odyssey(&["synth", "--n", "200", "--seed", "7", "--out", c])?;
    let start = Instant::now();
    let stdout = odyssey(&["eval", c, "--agent", "builtin:oracle", "--jobs", "1", "--out", o])?;
    let elapsed = start.elapsed();
    let overall = stdout
        .lines()
        .find(|l| l.starts_with("| Overall"))
        .ok_or("no Overall row")?
        .to_string();
    ensure(overall.starts_with("| Overall | 100.00 | 100.00 |"), || overall.clone())?;
    let records = read_records(&out.join("records.jsonl"));
    let (a, s) = (ams(&records).unwrap(), success_rate(&records).unwrap());
    ensure(a == 1.0 && s == 1.0, || format!("AMS {a}, SR {s}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("eval took {elapsed:?}"))?;
    Ok(format!("AMS = {a:.4}, SR = {s:.4} over {} steps in {elapsed:.2?}", records.len()))
}

fn metric_calibration() -> Outcome {
    let corpus = generate_corpus(&GenSpec::new(1000, 11)).unwrap();
    let n_steps = corpus.total_steps();
    ensure(n_steps >= 10_000, || format!("only {n_steps} steps"))?;
    let agent = PerturbedAgent::new(&corpus, 0.2, 5).unwrap();
    let config = HarnessConfig {
        jobs: 4,
        ..HarnessConfig::default()
    };
    let run = evaluate_offline(&corpus, &agent, &config).map_err(|e| e.to_string())?;
    let a = ams(&run.records).unwrap();
    let s = success_rate(&run.records).unwrap();
    let expected: f64 =
        corpus.episodes.iter().map(|e| 0.8f64.powi(e.steps.len() as i32)).sum::<f64>() / corpus.len() as f64;
    ensure((0.78..=0.82).contains(&a), || format!("AMS {a}"))?;
    ensure((s - expected).abs() <= 0.02, || format!("SR {s} vs expected {expected}"))?;
    Ok(format!("{n_steps} steps: AMS = {a:.4}; SR = {s:.4} vs mean(0.8^T) = {expected:.4}"))
}

fn matching_constants() -> Outcome {
    let tall = DeviceInfo::new("tall", 1000, 10_000);
    let gold = Point::new(500, 2000);
    let at = |dy: u32| match_positional(Point::new(500, 2000 + dy), gold, &tall, None).unwrap();
    ensure(at(1400).matched, || "distance 0.14 did not match".into())?;
    ensure(!at(1401).matched, || "distance 0.1401 matched".into())?;
    let phone = DeviceInfo::new("Medium Phone", 1080, 2400);
    ensure(
        match_positional(Point::new(540, 1536), Point::new(540, 1200), &phone, None).unwrap().matched,
        || "336/2400 did not match".into(),
    )?;
    let ty = |p: String, g: String| match_step(&Action::Type { text: p }, &Action::Type { text: g }, &phone, None);
    ensure(anls("ab", "ax") == 0.5 && ty("ab".into(), "ax".into()).matched, || "anls 0.5 did not match".into())?;
    // lev 5001 over length 10000 gives 0.4999
    let gold_text = "a".repeat(10_000);
    let pred_text = format!("{}{}", "b".repeat(5001), "a".repeat(4999));
    let sim = anls(&pred_text, &gold_text);
    ensure((sim - 0.4999).abs() < 1e-12, || format!("anls {sim}"))?;
    let outcome = ty(pred_text, gold_text);
    ensure(!outcome.matched && outcome.reason == MatchReason::AnlsBelowThreshold, || format!("{outcome:?}"))?;
    Ok("0.14 matches, 0.1401 does not; anls 0.5 matches, 0.4999 does not".into())
}

fn dp_levenshtein(a: &[char], b: &[char]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        t[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
        }
    }
    t[a.len()][b.len()]
}

fn anls_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let alphabet: Vec<char> = "abcAB é".chars().collect();
    let gen = |rng: &mut ChaCha8Rng| -> Vec<char> {
        let n = rng.random_range(0..=12);
        (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };
    let mut bad = 0;
    for _ in 0..1000 {
        let (a, b) = (gen(&mut rng), gen(&mut rng));
        let longest = a.len().max(b.len());
        let expected = if longest == 0 {
            1.0
        } else {
            1.0 - dp_levenshtein(&a, &b) as f64 / longest as f64
        };
        let (sa, sb): (String, String) = (a.iter().collect(), b.iter().collect());
        if anls(&sa, &sb) != expected {
            bad += 1;
        }
    }
    ensure(bad == 0, || format!("{bad} discrepancies"))?;
    Ok("1000 fuzzed pairs, 0 discrepancies".into())
}

fn tiny_episode(id: String, device: &str) -> Episode {
    let steps = vec![
        Step::new(1, format!("{id}/1.png"), Action::Home),
        Step::new(2, format!("{id}/2.png"), Action::Complete),
    ];
    Episode {
        episode_id: id,
        device_info: DeviceInfo::new(device, 1080, 2400),
        task_info: TaskInfo {
            category: TaskCategory::GeneralTool,
            apps: vec!["Clock".into()],
            high_level_instruction: "Set an alarm".into(),
            template_id: "T".into(),
            extra: Default::default(),
        },
        step_length: 2,
        steps,
    }
}

fn task_leak(corpus: &Corpus, r: &SplitResult) -> usize {
    let test: BTreeSet<&str> = r.test.iter().map(String::as_str).collect();
    let mut train_t = BTreeSet::new();
    let mut test_t = BTreeSet::new();
    for ep in &corpus.episodes {
        let t = &ep.task_info.template_id;
        if test.contains(ep.episode_id.as_str()) {
            test_t.insert(t);
        } else {
            train_t.insert(t);
        }
    }
    train_t.intersection(&test_t).count()
}

fn app_leak(corpus: &Corpus, r: &SplitResult) -> usize {
    let held: BTreeSet<&String> = r.held_out.iter().collect();
    let test: BTreeSet<&str> = r.test.iter().map(String::as_str).collect();
    corpus
        .episodes
        .iter()
        .filter(|ep| {
            let uses = ep.task_info.apps.iter().any(|a| held.contains(a));
            uses != test.contains(ep.episode_id.as_str())
        })
        .count()
}

fn split_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..50u64 {
        let spec = GenSpec::new(rng.random_range(120..400), 1000 + i);
        let corpus = generate_corpus(&spec).unwrap();
        let map = spec.catalog().category_map();
        let strategies = [
            Strategy::Random { ratio: 0.8 },
            Strategy::Task { test_fraction: 1.0 / 7.0 },
            Strategy::Device {
                device_name: "Tablet".into(),
            },
            Strategy::App {
                category_map: map,
                holdout_per_category: 1,
                target_test_fraction: 0.15,
            },
        ];
        for s in strategies {
            let name = s.name();
            let r = splits::split(&corpus, &SplitSpec::new(s, Some(i))).map_err(|e| format!("corpus {i} {name}: {e}"))?;
            ensure(r.is_partition_of(&corpus), || format!("corpus {i}: {name} is not a partition"))?;
        }
    }

    let mut eps: Vec<Episode> = (0..8334)
        .map(|i| tiny_episode(format!("ep{i:05}"), if i % 6 == 0 && i / 6 < 1381 { "Tablet" } else { "Medium Phone" }))
        .collect();
    eps.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    let big = Corpus::new(eps).unwrap();
    let tablets = big.episodes.iter().filter(|e| e.device_info.name == "Tablet").count();
    ensure(tablets == 1381, || format!("{tablets} tablets"))?;
    let d = split_device(&big, "Tablet").map_err(|e| e.to_string())?;
    ensure(d.train.len() == 6953 && d.test.len() == 1381, || format!("device {}/{}", d.train.len(), d.test.len()))?;
    let r = split_random(&big, 7, 0.8);
    ensure(r.train.len() == 6667 && r.test.len() == 1667, || format!("random {}/{}", r.train.len(), r.test.len()))?;

    for seed in 0..20u64 {
        let spec = GenSpec::new(500, 300 + seed);
        let corpus = generate_corpus(&spec).unwrap();
        let t = split_task(&corpus, seed, 1.0 / 7.0).map_err(|e| e.to_string())?;
        ensure(task_leak(&corpus, &t) == 0, || format!("seed {seed}: template leakage"))?;
        let a = split_app(&corpus, &spec.catalog().category_map(), 1, seed, 0.15).map_err(|e| e.to_string())?;
        ensure(app_leak(&corpus, &a) == 0, || format!("seed {seed}: app leakage"))?;
    }
    Ok("50 fuzzed corpora x 4 strategies partition; device 6953/1381; random 6667/1667; no leakage over 20 seeds".into())
}

fn resampler() -> Outcome {
    let d = 8;
    for k in 1..=8 {
        let p = ResamplerParams::init(256, d, Some(8), k as u64);
        let h = HistoryTokens::random(k, 16, d, 40 + k as u64);
        let out = resample(&p, &h).map_err(|e| e.to_string())?;
        ensure(out.shape() == (256, d), || format!("k={k}: shape {:?}", out.shape()))?;
        let a = attention_weights(&p, &h).map_err(|e| e.to_string())?;
        for r in 0..a.rows() {
            let s: f64 = a.row(r).iter().sum();
            ensure((s - 1.0).abs() <= 1e-6, || format!("k={k} row {r} sums to {s}"))?;
        }
    }
    let r = token_budget(4, 256, HistoryStrategy::Resampler { queries: 256 });
    let c = token_budget(4, 256, HistoryStrategy::Concat);
    ensure(r == 256 && c == 1024, || format!("budgets {r} / {c}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let (m, d, k, n) = (
            rng.random_range(1..=6),
            rng.random_range(2..=8),
            rng.random_range(1..=4),
            rng.random_range(1..=4),
        );
        let p = ResamplerParams::init(m, d, Some(k), i);
        let h = HistoryTokens::random(k, n, d, 100 + i);
        worst = worst.max(grad_check(&p, &h, 1e-4).map_err(|e| e.to_string())?.max_rel_error);
    }
    ensure(worst < 1e-4, || format!("grad check max relative error {worst:e}"))?;

    let mut p = ResamplerParams::init(16, d, Some(3), 1);
    p.w_k = Matrix::zeros(d, d);
    let h = HistoryTokens::random(3, 5, d, 2);
    let out = resample(&p, &h).map_err(|e| e.to_string())?;
    let mean = h.tokens.matmul(&p.w_v).mean_rows().matmul(&p.w_o);
    for r in 0..out.rows() {
        for c in 0..d {
            ensure((out[(r, c)] - mean[(0, c)]).abs() <= 1e-6, || format!("constant logits row {r} col {c}"))?;
        }
    }
    Ok(format!("256 x d for k = 1..8; budgets 256 vs 1024; grad check max {worst:.2e}; constant logits average values"))
}

fn context_windows() -> Outcome {
    let corpus = generate_corpus(&GenSpec::new(100, 21)).unwrap();
    let mut checked = 0;
    for ep in &corpus.episodes {
        for t in 1..=ep.steps.len() as u32 {
            let req = build_context(ep, t, InstructionLevel::High, 4).map_err(|e| e.to_string())?;
            let want = (t as usize - 1).min(4);
            ensure(req.history_screenshots.len() == want, || {
                format!("{} t={t}: {} screenshots", ep.episode_id, req.history_screenshots.len())
            })?;
            ensure(req.history_actions.len() == t as usize - 1, || format!("{} t={t}: history actions", ep.episode_id))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} steps of 100 episodes"))
}

/// Every later step differs in every field a prompt could read.
fn scramble_after(ep: &mut Episode, t: u32) {
    for s in ep.steps.iter_mut().filter(|s| s.index > t) {
        scramble(s);
    }
}

fn scramble(s: &mut Step) {
    s.action = match s.action {
        Action::Home => Action::Back,
        _ => Action::Home,
    };
    s.bbox = None;
    s.screenshot = format!("mutated/{}", s.screenshot);
    s.low_level_instruction = Some("mutated".into());
    s.semantic = Some(SemanticAnnotation {
        screen_description: "mutated".into(),
        contextual_info: "mutated".into(),
        decision_rationale: "mutated".into(),
    });
    s.notes = Some("mutated".into());
}

fn stage_requests(a: &Annotator, ep: &Episode, t: u32, prior: &[String], ctx: &str) -> Vec<LlmRequest> {
    vec![
        a.contextual_request(ep, t, prior).unwrap(),
        a.screen_rationale_request(ep, t, ctx).unwrap(),
        a.low_level_request(ep, t).unwrap(),
    ]
}

fn pipeline_hermetic() -> Outcome {
    let corpus = generate_corpus(&GenSpec::new(70, 8)).unwrap();
    let n_steps = corpus.total_steps();
    ensure(n_steps >= 1000, || format!("only {n_steps} steps"))?;
    let run = || -> Result<Vec<u8>, String> {
        let mock = MockBackend::new();
        let a = Annotator::new(&mock);
        let mut bytes = Vec::new();
        for ep in &corpus.episodes {
            let out = a.annotate_episode(ep);
            if !out.report.is_complete() || out.report.annotated_steps != ep.steps.len() {
                return Err(format!("{} incomplete: {:?}", ep.episode_id, out.report.failure));
            }
            bytes.extend(serialize_episode(&out.episode).map_err(|e| e.to_string())?);
        }
        Ok(bytes)
    };
    let first = run()?;
    ensure(first == run()?, || "two runs differ".into())?;

    let mock = MockBackend::new();
    let a = Annotator::new(&mock);
    let mut checked = 0;
    for ep in &corpus.episodes {
        let done = a.annotate_episode(ep).episode;
        for t in 1..=ep.steps.len() as u32 {
            let i = t as usize - 1;
            let prior: Vec<String> = done.steps[..i]
                .iter()
                .map(|s| s.semantic.as_ref().unwrap().decision_rationale.clone())
                .collect();
            let ctx = done.steps[i].semantic.as_ref().unwrap().contextual_info.clone();
            let base = stage_requests(&a, ep, t, &prior, &ctx);

            let mut later = ep.clone();
            scramble_after(&mut later, t);
            ensure(base == stage_requests(&a, &later, t, &prior, &ctx), || {
                format!("{} t={t}: prompt reads a later step", ep.episode_id)
            })?;

            let mut current = later.clone();
            scramble(&mut current.steps[i]);
            ensure(base[0] == a.contextual_request(&current, t, &prior).unwrap(), || {
                format!("{} t={t}: contextual prompt reads step t", ep.episode_id)
            })?;

            // sensitivity: the previous step's action must show up
            if t > 1 {
                let mut earlier = ep.clone();
                scramble(&mut earlier.steps[i - 1]);
                ensure(base[0] != a.contextual_request(&earlier, t, &prior).unwrap(), || {
                    format!("{} t={t}: contextual prompt ignores step t-1", ep.episode_id)
                })?;
            }
            checked += 1;
        }
    }
    Ok(format!("{n_steps} steps annotated identically twice; causality held at {checked} steps"))
}

fn mutations() -> Vec<(&'static str, Rule, fn(&mut Episode))> {
    vec![
        ("blank episode_id", Rule::EmptyEpisodeId, |e| e.episode_id = " ".into()),
        ("zero width", Rule::DeviceResolution, |e| e.device_info.width = 0),
        ("no apps", Rule::EmptyApps, |e| e.task_info.apps.clear()),
        ("blank instruction", Rule::EmptyInstruction, |e| e.task_info.high_level_instruction = "".into()),
        ("step_length off by one", Rule::StepLength, |e| e.step_length += 1),
        ("index out of place", Rule::StepIndex, |e| e.steps[0].index = 9),
        ("ends with CLICK", Rule::TerminalAction, |e| {
            let last = e.steps.last_mut().unwrap();
            last.action = Action::Click { pos1: Point::new(1, 1) };
            last.notes = None;
        }),
        ("COMPLETE first", Rule::EarlyTerminal, |e| {
            e.steps[0].action = Action::Complete;
            e.steps[0].bbox = None;
        }),
        ("click off screen", Rule::PointOutOfRange, |e| {
            let w = e.device_info.width;
            e.steps[0].action = Action::Click { pos1: Point::new(w, 0) };
            e.steps[0].bbox = None;
        }),
        ("scroll in place", Rule::ScrollDegenerate, |e| {
            e.steps[0].action = Action::Scroll {
                pos1: Point::new(5, 5),
                pos2: Point::new(5, 5),
            };
            e.steps[0].bbox = None;
        }),
        ("bbox on terminal step", Rule::BboxNotAllowed, |e| {
            e.steps.last_mut().unwrap().bbox = Some(BoundingBox::new(Point::new(0, 0), Point::new(1, 1)));
        }),
        ("no screenshot", Rule::ScreenshotEmpty, |e| e.steps[0].screenshot = "".into()),
    ]
}

fn round_trip() -> Outcome {
    let corpus = generate_corpus(&GenSpec::new(1000, 5)).unwrap();
    for ep in &corpus.episodes {
        let v = validate_structure(ep, None);
        ensure(v.is_empty(), || format!("{}: {v:?}", ep.episode_id))?;
        let once = serialize_episode(ep).map_err(|e| e.to_string())?;
        let parsed = parse_episode(&once).map_err(|e| format!("{}: {e}", ep.episode_id))?;
        ensure(&parsed == ep, || format!("{}: parse changed the episode", ep.episode_id))?;
        let twice = serialize_episode(&parsed).map_err(|e| e.to_string())?;
        ensure(once == twice, || format!("{}: not a fixed point", ep.episode_id))?;
    }
    let muts = mutations();
    let mut caught: BTreeMap<&str, usize> = BTreeMap::new();
    for ep in &corpus.episodes {
        for (name, rule, apply) in &muts {
            let mut m = ep.clone();
            apply(&mut m);
            let v = validate_structure(&m, None);
            ensure(v.iter().any(|x| x.rule == *rule), || format!("{}: {name} not caught: {v:?}", ep.episode_id))?;
            *caught.entry(name).or_default() += 1;
        }
    }
    Ok(format!(
        "1000 episodes are fixed points and valid; {} mutations each caught on every episode",
        caught.len()
    ))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("oracle end-to-end", oracle_end_to_end),
        ("metric calibration", metric_calibration),
        ("matching constants", matching_constants),
        ("anls oracle equivalence", anls_oracle),
        ("split properties", split_properties),
        ("resampler", resampler),
        ("context windows", context_windows),
        ("pipeline hermetic run", pipeline_hermetic),
        ("round-trip", round_trip),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let result = panic::catch_unwind(f).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} criteria, {failed} failed", 9);
    if failed > 0 {
        std::process::exit(1);
    }
}
