use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use omniloop_core::action::{choice_letter, ActionKind};
use omniloop_core::analytics::{
    dense_registry, run_question, score_suite, suite_planner, AnalyticsError, BenchReport, PlannerReport,
};
use omniloop_core::cost::TokenCost;
use omniloop_core::episode::{episode_seed, parse_trace, run_episode, serialize_trace, EpisodeConfig, Trace};
use omniloop_core::fsutil::write_atomic;
use omniloop_core::gateway::{Credentials, GatewayClient, API_KEY_ENV};
use omniloop_core::planner::{DensePlanner, LlmPlanner, Planner, PlannerKind, RandomPlanner, ReplayPlanner};
use omniloop_core::retrieval::RetrievalConfig;
use omniloop_core::scene::{
    load_questions, load_scene, load_suite, write_suite, GenerationError, GeneratorProfile, QuestionItem, Scene,
    SceneError, Suite, MANIFEST_FILE,
};
use omniloop_core::tools::{LiveToolBackend, ToolLimits, ToolRegistry};

use crate::config::AppConfig;
use crate::{BenchArgs, Cli, CliError, Command, CompareArgs, EpisodeFlags, GenArgs, RunArgs, ValidateArgs, EXIT_OK};

type Env<'a> = &'a dyn Fn(&str) -> Option<String>;

pub fn dispatch(cli: Cli, env: Env<'_>) -> Result<i32, CliError> {
    let mut cfg = AppConfig::load(cli.config.as_deref(), env)?;
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    match cli.command {
        Command::Run(a) => cmd_run(a, cfg, env),
        Command::Gen(a) => cmd_gen(a, cfg),
        Command::Bench(a) => cmd_bench(a, cfg),
        Command::Compare(a) => cmd_compare(a, cfg),
        Command::Validate(a) => Ok(cmd_validate(a)),
    }
}

fn scene_error(e: SceneError) -> CliError {
    if e.is_io() {
        CliError::no_input(e.to_string())
    } else {
        CliError::data(e.to_string())
    }
}

fn parse_budget(text: &str) -> Result<TokenCost, CliError> {
    let parts: Vec<u64> = text
        .split(',')
        .map(|p| p.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::usage(format!("--token-budget {text}: {e}")))?;
    match parts[..] {
        [v, a, t] => Ok(TokenCost::new(v, a, t)),
        _ => Err(CliError::usage(format!("--token-budget {text}: expected VISUAL,AUDIO,TEXT"))),
    }
}

fn apply_flags(cfg: &mut AppConfig, flags: &EpisodeFlags) -> Result<(), CliError> {
    if let Some(n) = flags.max_steps {
        cfg.episode.max_steps = n;
    }
    if let Some(b) = &flags.token_budget {
        cfg.episode.token_budget = Some(parse_budget(b)?);
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::usage(format!("--jobs {jobs}: {e}")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::cant_create(format!("{}: {e}", dir.display())))?;
    }
    write_atomic(path, bytes).map_err(|e| CliError::cant_create(format!("{}: {e}", path.display())))
}

/// A bare name is looked up as `<scenes dir>/<name>.scene.json`; anything path-like is used as is.
fn resolve_scene(name: &str, scenes_dir: &Path) -> PathBuf {
    let p = Path::new(name);
    if p.extension().is_some() || p.components().count() > 1 {
        p.to_path_buf()
    } else {
        scenes_dir.join(format!("{name}.scene.json"))
    }
}

/// `x.scene.json` pairs with `x.questions.json`; inside a suite, with `../questions.json`.
fn resolve_questions(scene_path: &Path) -> PathBuf {
    let name = scene_path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let dir = scene_path.parent().unwrap_or(Path::new("."));
    let sibling = dir.join(name.replace(".scene.json", ".questions.json"));
    if sibling.exists() {
        return sibling;
    }
    let suite = dir.parent().map(|d| d.join("questions.json"));
    suite.filter(|p| p.exists()).unwrap_or(sibling)
}

fn gateway_client(cfg: &AppConfig, env: Env<'_>) -> Arc<GatewayClient> {
    let credentials = env(API_KEY_ENV).filter(|k| !k.is_empty()).map(Credentials::new);
    Arc::new(GatewayClient::new(cfg.gateway_config(), credentials))
}

fn cmd_run(a: RunArgs, mut cfg: AppConfig, env: Env<'_>) -> Result<i32, CliError> {
    if let Some(p) = a.planner {
        cfg.planner = p;
    }
    apply_flags(&mut cfg, &a.episode)?;
    let episode = cfg.episode_config()?;

    let scene_path = resolve_scene(&a.scene, &cfg.paths.scenes);
    let scene = load_scene(&scene_path).map_err(scene_error)?;
    let questions_path = a.questions.clone().unwrap_or_else(|| resolve_questions(&scene_path));
    let questions = load_questions(&questions_path).map_err(scene_error)?;
    let item = questions
        .iter()
        .find(|q| q.id == a.question)
        .ok_or_else(|| CliError::data(format!("{}: no question '{}'", questions_path.display(), a.question)))?;
    item.validate(Some(&scene))
        .map_err(|e| CliError::data(format!("{}: question {}: {e}", questions_path.display(), item.id)))?;
    let q = item.to_query(&scene);

    let retrieval = RetrievalConfig::default();
    let mut planner: Box<dyn Planner> = match cfg.planner {
        PlannerKind::Replay => {
            let path = a.script.as_ref().ok_or_else(|| CliError::usage("--planner replay requires --script"))?;
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::no_input(format!("{}: {e}", path.display())))?;
            let script = parse_trace(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?.script();
            Box::new(ReplayPlanner::new(script))
        }
        PlannerKind::Llm => Box::new(LlmPlanner::new(
            gateway_client(&cfg, env),
            cfg.gateway.model.clone(),
            cfg.gateway.timeout_ms,
            cfg.gateway.max_retries,
            cfg.seed,
        )),
        PlannerKind::Dense => Box::new(DensePlanner::new(retrieval)),
        PlannerKind::Random => Box::new(RandomPlanner::new(episode_seed(cfg.seed, &q.id))),
        kind => suite_planner(kind, &q.id, &episode).map_err(|e| CliError::usage(e.to_string()))?,
    };
    let mut registry = if cfg.planner == PlannerKind::Dense {
        dense_registry(episode.cost_model.clone(), retrieval, ToolLimits::default())
    } else {
        ToolRegistry::mock(episode.cost_model.clone())
    };
    if a.live_tools {
        let tool = Arc::new(LiveToolBackend::new(
            gateway_client(&cfg, env),
            cfg.gateway.tool_model.clone(),
            cfg.gateway.timeout_ms,
            cfg.gateway.max_retries,
            cfg.seed,
        ));
        for kind in ActionKind::TOOLS {
            registry.bind(kind, tool.clone()).map_err(|e| CliError::usage(e.to_string()))?;
        }
    }

    let trace =
        run_episode(&q, &scene, planner.as_mut(), &registry, &episode).map_err(|e| CliError::data(e.to_string()))?;
    let out =
        a.trace_out.unwrap_or_else(|| cfg.paths.traces.join(format!("{}.{}.{}.jsonl", scene.id, q.id, cfg.planner)));
    write_file(&out, serialize_trace(&trace).as_bytes())?;
    print!("{}", run_summary(&trace, &retrieval, &out));
    Ok(trace.termination.exit_code())
}

fn run_summary(t: &Trace, retrieval: &RetrievalConfig, trace_path: &Path) -> String {
    let mut s = String::new();
    let answer = match (&t.final_answer, t.answer_index(retrieval)) {
        (Some(raw), Some(i)) => format!("{} ({}) [raw: {raw}]", choice_letter(i), t.query.choices[i]),
        (Some(raw), None) => format!("unresolved [raw: {raw}]"),
        (None, _) => "none".into(),
    };
    let termination = serde_json::to_value(t.termination).expect("termination serializes");
    let _ = writeln!(s, "answer: {answer}");
    let _ = writeln!(s, "termination: {}", termination.as_str().unwrap_or_default());
    if let Some(e) = &t.planner_error {
        let _ = writeln!(s, "planner_error: {e}");
    }
    let _ = writeln!(s, "steps: {} ({} tool calls)", t.entries.len(), t.entries.tool_calls());
    let c = t.total_cost;
    let _ = writeln!(s, "tokens: visual {} audio {} text {}", c.visual, c.audio, c.text);
    let _ = writeln!(s, "latency_ms: {}", t.total_latency_ms);
    let _ = writeln!(s, "trace: {}", trace_path.display());
    s
}

fn load_profile(path: &Path) -> Result<GeneratorProfile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::no_input(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn cmd_gen(a: GenArgs, cfg: AppConfig) -> Result<i32, CliError> {
    let seed = a.seed.unwrap_or(cfg.seed);
    let profile = a.profile.as_deref().map(load_profile).transpose()?.unwrap_or_default();
    let suite = Suite::generate(seed, a.n as usize, &profile).map_err(|e| match e {
        GenerationError::NoScenes => CliError::usage(e.to_string()),
        _ => CliError::data(e.to_string()),
    })?;
    let out = a.out.unwrap_or_else(|| PathBuf::from(format!("suites/seed-{seed}")));
    write_suite(&out, &suite).map_err(|e| CliError::cant_create(e.to_string()))?;
    println!(
        "wrote {} scenes and {} questions ({} cross-modal) to {}",
        suite.scenes.len(),
        suite.questions.len(),
        suite.questions.iter().filter(|q| q.requires_cross_modal).count(),
        out.display()
    );
    Ok(EXIT_OK)
}

fn check_suite_planners(kinds: &[PlannerKind]) -> Result<(), CliError> {
    match kinds.iter().find(|k| matches!(k, PlannerKind::Replay | PlannerKind::Llm)) {
        Some(k) => Err(CliError::usage(AnalyticsError::UnsupportedPlanner(*k).to_string())),
        None if kinds.is_empty() => Err(CliError::usage("no planners given")),
        None => Ok(()),
    }
}

/// Runs every suite question in parallel; results come back in question-id order.
fn run_parallel(
    kind: PlannerKind,
    suite: &Suite,
    cfg: &EpisodeConfig,
    pool: &rayon::ThreadPool,
) -> Result<Vec<Trace>, CliError> {
    let mut items: Vec<&QuestionItem> = suite.questions.iter().collect();
    items.sort_by(|a, b| a.id.cmp(&b.id));
    pool.install(|| items.par_iter().map(|q| run_question(kind, q, suite, cfg)).collect::<Result<Vec<_>, _>>())
        .map_err(|e| CliError::data(e.to_string()))
}

fn score(kind: PlannerKind, traces: &[Trace], suite: &Suite) -> Result<PlannerReport, CliError> {
    score_suite(kind.as_str(), traces, &suite.questions, &RetrievalConfig::default())
        .map_err(|e| CliError::data(e.to_string()))
}

fn cmd_bench(a: BenchArgs, mut cfg: AppConfig) -> Result<i32, CliError> {
    check_suite_planners(&a.planners)?;
    apply_flags(&mut cfg, &a.episode)?;
    let episode = cfg.episode_config()?;
    let suite = load_suite(&a.suite).map_err(scene_error)?;
    let pool = pool(cfg.jobs)?;
    let mut reports = Vec::new();
    for &kind in &a.planners {
        let traces = run_parallel(kind, &suite, &episode, &pool)?;
        if let Some(dir) = &a.traces {
            for t in &traces {
                write_file(
                    &dir.join(kind.as_str()).join(format!("{}.jsonl", t.query.id)),
                    serialize_trace(t).as_bytes(),
                )?;
            }
        }
        reports.push(score(kind, &traces, &suite)?);
    }
    let report = BenchReport::new(suite.manifest.suite_id.clone(), reports);
    let out = a.out.unwrap_or_else(|| cfg.paths.reports.clone());
    report.write_dir(&out).map_err(|e| CliError::cant_create(format!("{}: {e}", out.display())))?;
    let text = report.to_text();
    print!("{}", text.split("\n\n").next().unwrap_or_default());
    println!("\nreports written to {}", out.display());
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct PlannerSummary {
    planner: String,
    accuracy: f64,
    mean_visual_tokens: f64,
    mean_audio_tokens: f64,
    mean_latency_ms: f64,
    mean_tool_calls: f64,
}

#[derive(Debug, Serialize)]
struct Disagreement {
    question_id: String,
    expected: String,
    candidate: Option<String>,
    baseline: Option<String>,
}

#[derive(Debug, Serialize)]
struct Comparison {
    suite_id: String,
    candidate: PlannerSummary,
    baseline: PlannerSummary,
    accuracy_delta: f64,
    visual_token_ratio: Option<f64>,
    latency_ratio: Option<f64>,
    disagreements: Vec<Disagreement>,
}

fn summary(r: &PlannerReport) -> PlannerSummary {
    PlannerSummary {
        planner: r.planner.clone(),
        accuracy: r.accuracy,
        mean_visual_tokens: r.mean_cost.visual,
        mean_audio_tokens: r.mean_cost.audio,
        mean_latency_ms: r.mean_latency_ms,
        mean_tool_calls: r.outcomes.iter().map(|o| o.tool_calls).sum::<usize>() as f64 / r.outcomes.len() as f64,
    }
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

fn cmd_compare(a: CompareArgs, mut cfg: AppConfig) -> Result<i32, CliError> {
    check_suite_planners(&[a.candidate, a.baseline])?;
    apply_flags(&mut cfg, &a.episode)?;
    let episode = cfg.episode_config()?;
    let suite = load_suite(&a.suite).map_err(scene_error)?;
    let pool = pool(cfg.jobs)?;
    let cand = score(a.candidate, &run_parallel(a.candidate, &suite, &episode, &pool)?, &suite)?;
    let base = score(a.baseline, &run_parallel(a.baseline, &suite, &episode, &pool)?, &suite)?;
    let letter = |p: Option<usize>| p.map(choice_letter);
    let disagreements = cand
        .outcomes
        .iter()
        .zip(&base.outcomes)
        .filter(|(c, b)| c.correct != b.correct)
        .map(|(c, b)| Disagreement {
            question_id: c.question_id.clone(),
            expected: choice_letter(c.expected),
            candidate: letter(c.predicted),
            baseline: letter(b.predicted),
        })
        .collect();
    let (cs, bs) = (summary(&cand), summary(&base));
    let cmp = Comparison {
        suite_id: suite.manifest.suite_id.clone(),
        accuracy_delta: cs.accuracy - bs.accuracy,
        visual_token_ratio: ratio(cs.mean_visual_tokens, bs.mean_visual_tokens),
        latency_ratio: ratio(cs.mean_latency_ms, bs.mean_latency_ms),
        candidate: cs,
        baseline: bs,
        disagreements,
    };
    print!("{}", comparison_text(&cmp));
    if let Some(out) = &a.out {
        let mut json = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
        json.push('\n');
        write_file(out, json.as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn comparison_text(c: &Comparison) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "suite {}", c.suite_id);
    let _ = writeln!(
        s,
        "{:<12} {:>9} {:>12} {:>12} {:>12} {:>10}",
        "planner", "accuracy", "visual_tok", "audio_tok", "latency_ms", "tools"
    );
    for p in [&c.candidate, &c.baseline] {
        let _ = writeln!(
            s,
            "{:<12} {:>9.4} {:>12.1} {:>12.1} {:>12.1} {:>10.2}",
            p.planner, p.accuracy, p.mean_visual_tokens, p.mean_audio_tokens, p.mean_latency_ms, p.mean_tool_calls
        );
    }
    let fmt_ratio = |r: Option<f64>| r.map_or("n/a".to_string(), |r| format!("{r:.4}"));
    let _ = writeln!(s, "accuracy delta: {:+.4}", c.accuracy_delta);
    let _ = writeln!(s, "visual token ratio: {}", fmt_ratio(c.visual_token_ratio));
    let _ = writeln!(s, "latency ratio: {}", fmt_ratio(c.latency_ratio));
    let _ = writeln!(s, "questions where exactly one planner is correct: {}", c.disagreements.len());
    for d in &c.disagreements {
        let opt = |x: &Option<String>| x.clone().unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "  {} expected {} {} {} {} {}",
            d.question_id,
            d.expected,
            c.candidate.planner,
            opt(&d.candidate),
            c.baseline.planner,
            opt(&d.baseline)
        );
    }
    s
}

/// Scene and question files directly inside a directory that is not a suite, sorted by name.
fn scene_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::no_input(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            p.is_file() && (name.ends_with(".scene.json") || name.ends_with("questions.json"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::no_input(format!("{}: no manifest.json and no scene or question files", dir.display())));
    }
    Ok(files)
}

fn validate_path(path: &Path) -> Result<String, CliError> {
    if path.is_dir() {
        let s = load_suite(path).map_err(scene_error)?;
        return Ok(format!(
            "suite {} with {} scenes and {} questions",
            s.manifest.suite_id,
            s.scenes.len(),
            s.questions.len()
        ));
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if name.ends_with("questions.json") {
        let questions = load_questions(path).map_err(scene_error)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for q in &questions {
            let scene_file = [
                dir.join(format!("{}.scene.json", q.scene_id)),
                dir.join("scenes").join(format!("{}.scene.json", q.scene_id)),
            ]
            .into_iter()
            .find(|p| p.exists());
            let scene: Option<Scene> = scene_file.map(|p| load_scene(&p)).transpose().map_err(scene_error)?;
            q.validate(scene.as_ref())
                .map_err(|e| CliError::data(format!("{}: question {}: {e}", path.display(), q.id)))?;
        }
        return Ok(format!("{} questions", questions.len()));
    }
    let s = load_scene(path).map_err(scene_error)?;
    Ok(format!(
        "scene {} ({} s, {} events, {} speech segments, {} facts)",
        s.id,
        s.duration_s,
        s.audio_events.len(),
        s.speech_segments.len(),
        s.visual_facts.len()
    ))
}

fn cmd_validate(a: ValidateArgs) -> i32 {
    let mut code = EXIT_OK;
    let mut report = |p: &Path, result: Result<String, CliError>| match result {
        Ok(what) => println!("ok {}: {what}", p.display()),
        Err(e) => {
            println!("error {}", e.message);
            code = code.max(e.code);
        }
    };
    for p in &a.paths {
        if p.is_dir() && !p.join(MANIFEST_FILE).exists() {
            match scene_files(p) {
                Ok(files) => files.iter().for_each(|f| report(f, validate_path(f))),
                Err(e) => report(p, Err(e)),
            }
        } else {
            report(p, validate_path(p));
        }
    }
    code
}
