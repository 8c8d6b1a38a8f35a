//! Post-hoc analysis over finished traces: tool usage, accuracy and cost.

mod report;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActionKind, Query};
use crate::cost::CostModel;
use crate::episode::{episode_seed, run_episode, EpisodeConfig, EpisodeError, Termination, Trace};
use crate::planner::{
    AdversarialPlanner, DensePlanner, HeuristicConfig, HeuristicPlanner, Planner, PlannerKind, RandomPlanner,
};
use crate::retrieval::RetrievalConfig;
use crate::scene::{QuestionItem, Scene, Suite};
use crate::tools::{DenseCaptionTool, MockTool, ToolLimits, ToolRegistry};

pub use report::{BenchReport, MeanCost, PlannerReport, QuestionOutcome, REPORT_FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("no traces to analyze")]
    EmptyInput,
    #[error("trace for question '{0}' has no answer key")]
    KeyMismatch(String),
    #[error("planner '{0}' needs inputs a suite run cannot provide")]
    UnsupportedPlanner(PlannerKind),
    #[error("question '{question}' refers to unknown scene '{scene}'")]
    MissingScene { question: String, scene: String },
    #[error(transparent)]
    Episode(#[from] EpisodeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolStats {
    pub call_count: usize,
    /// Share of all tool calls across the analyzed traces.
    pub call_ratio: f64,
    /// Mean 0-based step index at which the tool was invoked.
    pub mean_invocation_step: f64,
    pub min_invocation_step: usize,
    /// Invocation counts keyed by step index.
    pub step_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolUsageStats {
    pub episodes: usize,
    pub total_calls: usize,
    /// True when no trace called any tool.
    pub empty: bool,
    /// Only tools that were called at least once.
    pub per_tool: BTreeMap<ActionKind, ToolStats>,
}

/// Exact per-tool counts, ratios and invocation steps over non-ANSWER entries.
pub fn compute_usage(traces: &[Trace]) -> Result<ToolUsageStats, AnalyticsError> {
    if traces.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut steps: BTreeMap<ActionKind, Vec<usize>> = BTreeMap::new();
    for t in traces {
        for e in t.entries.entries().iter().filter(|e| e.observation.is_some()) {
            steps.entry(e.decision.action()).or_default().push(e.step);
        }
    }
    let total_calls: usize = steps.values().map(Vec::len).sum();
    let per_tool = steps
        .into_iter()
        .map(|(kind, s)| {
            let mut step_histogram = BTreeMap::new();
            for &k in &s {
                *step_histogram.entry(k).or_insert(0) += 1;
            }
            let stats = ToolStats {
                call_count: s.len(),
                call_ratio: s.len() as f64 / total_calls as f64,
                mean_invocation_step: s.iter().sum::<usize>() as f64 / s.len() as f64,
                min_invocation_step: s.iter().copied().min().unwrap_or(0),
                step_histogram,
            };
            (kind, stats)
        })
        .collect();
    Ok(ToolUsageStats { episodes: traces.len(), total_calls, empty: total_calls == 0, per_tool })
}

/// Scores one planner's traces against the answer keys.
pub fn score_suite(
    planner: &str,
    traces: &[Trace],
    questions: &[QuestionItem],
    retrieval: &RetrievalConfig,
) -> Result<PlannerReport, AnalyticsError> {
    if traces.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let keys: BTreeMap<&str, &QuestionItem> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut outcomes = Vec::with_capacity(traces.len());
    for t in traces {
        let key = keys
            .get(t.query.id.as_str())
            .filter(|k| k.scene_id == t.query.scene_id)
            .ok_or_else(|| AnalyticsError::KeyMismatch(t.query.id.clone()))?;
        let predicted = t.answer_index(retrieval);
        outcomes.push(QuestionOutcome {
            question_id: t.query.id.clone(),
            scene_id: t.query.scene_id.clone(),
            expected: key.answer_index,
            predicted,
            correct: predicted == Some(key.answer_index),
            termination: t.termination,
            tool_calls: t.entries.tool_calls(),
            cost: t.total_cost,
            latency_ms: t.total_latency_ms,
        });
    }
    outcomes.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    let n = outcomes.len();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    let sum = |f: fn(&QuestionOutcome) -> u64| outcomes.iter().map(f).sum::<u64>() as f64 / n as f64;
    Ok(PlannerReport {
        planner: planner.to_string(),
        questions: n,
        correct,
        accuracy: correct as f64 / n as f64,
        mean_cost: MeanCost {
            visual: sum(|o| o.cost.visual),
            audio: sum(|o| o.cost.audio),
            text: sum(|o| o.cost.text),
        },
        mean_latency_ms: sum(|o| o.latency_ms),
        usage: compute_usage(traces)?,
        outcomes,
    })
}

/// Mock tools everywhere except GLOBAL_QA, which is the dense-caption backend.
pub fn dense_registry(cost_model: CostModel, retrieval: RetrievalConfig, limits: ToolLimits) -> ToolRegistry {
    let mut r = ToolRegistry::new(cost_model, retrieval, limits);
    for kind in ActionKind::TOOLS {
        r.bind(kind, Arc::new(MockTool)).expect("tool kinds are bindable");
    }
    r.bind(ActionKind::GlobalQa, Arc::new(DenseCaptionTool)).expect("tool kinds are bindable");
    r
}

/// The fixed dense-caption comparator: caption everything at the dense frame rate,
/// transcribe, then answer by retrieval over what was captioned.
pub fn dense_caption_baseline(q: &Query, scene: &Scene, cfg: &EpisodeConfig) -> Result<Trace, AnalyticsError> {
    let retrieval = RetrievalConfig::default();
    let registry = dense_registry(cfg.cost_model.clone(), retrieval, ToolLimits::default());
    let cfg = EpisodeConfig { planner_kind: PlannerKind::Dense, ..cfg.clone() };
    Ok(run_episode(q, scene, &mut DensePlanner::new(retrieval), &registry, &cfg)?)
}

/// Builds a fresh planner for one episode of a suite run.
pub fn suite_planner(
    kind: PlannerKind,
    query_id: &str,
    cfg: &EpisodeConfig,
) -> Result<Box<dyn Planner>, AnalyticsError> {
    Ok(match kind {
        PlannerKind::Heuristic => {
            Box::new(HeuristicPlanner::new(HeuristicConfig::default(), RetrievalConfig::default()))
        }
        PlannerKind::Random => Box::new(RandomPlanner::new(episode_seed(cfg.seed, query_id))),
        PlannerKind::Adversarial => Box::new(AdversarialPlanner),
        PlannerKind::Dense => Box::new(DensePlanner::new(RetrievalConfig::default())),
        PlannerKind::Replay | PlannerKind::Llm => return Err(AnalyticsError::UnsupportedPlanner(kind)),
    })
}

/// Runs one suite question with a self-contained planner over mock tools.
pub fn run_question(
    kind: PlannerKind,
    item: &QuestionItem,
    suite: &Suite,
    cfg: &EpisodeConfig,
) -> Result<Trace, AnalyticsError> {
    let scene = suite
        .scene(&item.scene_id)
        .ok_or_else(|| AnalyticsError::MissingScene { question: item.id.clone(), scene: item.scene_id.clone() })?;
    let q = item.to_query(scene);
    let cfg = EpisodeConfig { planner_kind: kind, ..cfg.clone() };
    if kind == PlannerKind::Dense {
        return dense_caption_baseline(&q, scene, &cfg);
    }
    let mut planner = suite_planner(kind, &item.id, &cfg)?;
    let registry = ToolRegistry::mock(cfg.cost_model.clone());
    Ok(run_episode(&q, scene, planner.as_mut(), &registry, &cfg)?)
}

/// Every question of the suite in question-id order.
pub fn run_suite(kind: PlannerKind, suite: &Suite, cfg: &EpisodeConfig) -> Result<Vec<Trace>, AnalyticsError> {
    let mut items: Vec<&QuestionItem> = suite.questions.iter().collect();
    items.sort_by(|a, b| a.id.cmp(&b.id));
    items.into_iter().map(|q| run_question(kind, q, suite, cfg)).collect()
}

/// Runs and scores each planner over the suite.
pub fn bench_suite(
    suite: &Suite,
    planners: &[PlannerKind],
    cfg: &EpisodeConfig,
) -> Result<BenchReport, AnalyticsError> {
    let retrieval = RetrievalConfig::default();
    let reports = planners
        .iter()
        .map(|&kind| score_suite(kind.as_str(), &run_suite(kind, suite, cfg)?, &suite.questions, &retrieval))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchReport::new(suite.manifest.suite_id.clone(), reports))
}

/// True when a trace ended with an answer the key marks correct.
pub fn is_correct(t: &Trace, expected: usize, retrieval: &RetrievalConfig) -> bool {
    t.termination == Termination::Answered && t.answer_index(retrieval) == Some(expected)
}
