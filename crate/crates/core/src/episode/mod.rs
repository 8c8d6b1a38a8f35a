//! The think, act, observe, reflect loop and the traces it emits.

mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActionArgs, ActionKind, Observation, Query};
use crate::cost::{CostModel, CostModelError, TokenCost};
use crate::planner::{reflect, reflect_memory, Planner, PlannerDecision, PlannerKind, ReflectionNote};
use crate::retrieval::{RetrievalConfig, Terms};
use crate::scene::Scene;
use crate::tools::{RegistryError, ToolRegistry};

pub use trace::{parse_trace, serialize_trace, TraceFormatError, TRACE_FORMAT_VERSION};

/// Default cap on non-ANSWER decisions per episode.
pub const DEFAULT_MAX_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryEntry {
    pub step: usize,
    pub decision: PlannerDecision,
    /// Absent exactly when the decision is ANSWER.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
    pub reflection: ReflectionNote,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("entry step {got} does not follow {expected}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("entry {step}: observation must be present iff the action is not ANSWER")]
    ObservationMismatch { step: usize },
}

/// Append-only episode memory.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Memory {
    entries: Vec<MemoryEntry>,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: MemoryEntry) -> Result<(), MemoryError> {
        if entry.step != self.entries.len() {
            return Err(MemoryError::OutOfOrder { expected: self.entries.len(), got: entry.step });
        }
        if entry.observation.is_some() == (entry.decision.action() == ActionKind::Answer) {
            return Err(MemoryError::ObservationMismatch { step: entry.step });
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&MemoryEntry> {
        self.entries.last()
    }

    /// Number of non-ANSWER entries.
    pub fn tool_calls(&self) -> usize {
        self.entries.iter().filter(|e| e.observation.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    Answered,
    MaxSteps,
    PlannerFailure,
}

impl Termination {
    /// Process exit status for a single-episode run.
    pub fn exit_code(self) -> i32 {
        match self {
            Termination::Answered => 0,
            Termination::MaxSteps => 2,
            Termination::PlannerFailure => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    /// When any component of the running total exceeds this, CLIP_QA is refused.
    pub token_budget: Option<TokenCost>,
    pub planner_kind: PlannerKind,
    pub cost_model: CostModel,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            token_budget: None,
            planner_kind: PlannerKind::Heuristic,
            cost_model: CostModel::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpisodeError {
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error(transparent)]
    CostModel(#[from] CostModelError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("query {query} refers to scene {expected}, got {got}")]
    SceneMismatch { query: String, expected: String, got: String },
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), EpisodeError> {
        if self.max_steps == 0 {
            return Err(EpisodeError::ZeroMaxSteps);
        }
        self.cost_model.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub query: Query,
    pub entries: Memory,
    pub final_answer: Option<String>,
    pub termination: Termination,
    /// Why the planner failed, when it did.
    pub planner_error: Option<String>,
    pub total_cost: TokenCost,
    pub total_latency_ms: u64,
    pub config_snapshot: EpisodeConfig,
}

impl Trace {
    pub fn actions(&self) -> Vec<ActionKind> {
        self.entries.entries().iter().map(|e| e.decision.action()).collect()
    }

    /// The decisions in order, usable as a replay script.
    pub fn script(&self) -> Vec<PlannerDecision> {
        self.entries.entries().iter().map(|e| e.decision.clone()).collect()
    }

    /// The final answer mapped to a choice index.
    pub fn answer_index(&self, retrieval: &RetrievalConfig) -> Option<usize> {
        self.final_answer.as_deref().and_then(|a| normalize_answer(a, &self.query.choices, retrieval))
    }
}

/// Text of the observation that replaces a refused CLIP_QA.
pub const BUDGET_REFUSAL: &str = "budget: token budget exceeded; CLIP_QA refused, audio tools remain available";

/// Maps an answer to a choice index: a bare letter such as `B`, `(B)` or `B.`, else the single
/// choice whose terms the answer matches. Anything else is `None`.
pub fn normalize_answer(answer: &str, choices: &[String], retrieval: &RetrievalConfig) -> Option<usize> {
    let trimmed = answer.trim();
    let bare =
        trimmed.strip_prefix('(').and_then(|s| s.strip_suffix(')')).unwrap_or(trimmed).trim_end_matches('.').trim();
    let mut chars = bare.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_ascii_alphabetic() {
            let i = (c.to_ascii_uppercase() as u8 - b'A') as usize;
            return (i < choices.len()).then_some(i);
        }
    }
    let said = Terms::new(trimmed);
    let mut hits = choices.iter().enumerate().filter(|(_, c)| retrieval.matches(&Terms::new(c), &said));
    match (hits.next(), hits.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}

/// Per-episode seed: the run seed mixed with an FNV-1a hash of the query id, so that
/// episodes are independent of scheduling order.
pub fn episode_seed(seed: u64, query_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in query_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

/// Runs one episode to termination. Planner failures, step exhaustion and tool errors are
/// recorded in the trace; only violated preconditions are returned as errors.
pub fn run_episode(
    q: &Query,
    scene: &Scene,
    planner: &mut dyn Planner,
    registry: &ToolRegistry,
    cfg: &EpisodeConfig,
) -> Result<Trace, EpisodeError> {
    cfg.validate()?;
    registry.ensure_complete()?;
    if q.scene_id != scene.id {
        return Err(EpisodeError::SceneMismatch {
            query: q.id.clone(),
            expected: q.scene_id.clone(),
            got: scene.id.clone(),
        });
    }
    let mut memory = Memory::new();
    let mut total_cost = TokenCost::ZERO;
    let mut total_latency_ms = 0;
    let mut final_answer = None;
    let mut planner_error = None;
    let termination = loop {
        let decision = match planner.decide(q, &memory) {
            Ok(d) => d,
            Err(e) => {
                planner_error = Some(e.to_string());
                break Termination::PlannerFailure;
            }
        };
        let step = memory.len();
        if let ActionArgs::Answer { answer } = &decision.args {
            final_answer = Some(answer.clone());
            let reflection = reflect_memory(q, &memory, registry.retrieval());
            push(&mut memory, MemoryEntry { step, decision, observation: None, reflection });
            break Termination::Answered;
        }
        if memory.tool_calls() >= cfg.max_steps {
            break Termination::MaxSteps;
        }
        let observation = execute(&decision.args, scene, registry, cfg, total_cost);
        total_cost += observation.cost;
        total_latency_ms += observation.latency_ms;
        let reflection = reflect(q, &memory, &observation, registry.retrieval());
        push(&mut memory, MemoryEntry { step, decision, observation: Some(observation), reflection });
    };
    Ok(Trace {
        query: q.clone(),
        entries: memory,
        final_answer,
        termination,
        planner_error,
        total_cost,
        total_latency_ms,
        config_snapshot: EpisodeConfig { planner_kind: planner.kind(), ..cfg.clone() },
    })
}

fn push(memory: &mut Memory, entry: MemoryEntry) {
    memory.push(entry).expect("the loop appends entries in step order");
}

fn execute(
    args: &ActionArgs,
    scene: &Scene,
    registry: &ToolRegistry,
    cfg: &EpisodeConfig,
    spent: TokenCost,
) -> Observation {
    let kind = args.kind();
    let refusal = |text: String| Observation {
        kind,
        latency_ms: cfg.cost_model.latency_ms(kind, &TokenCost::ZERO),
        text,
        windows: Vec::new(),
        cost: TokenCost::ZERO,
    };
    if kind == ActionKind::ClipQa && cfg.token_budget.is_some_and(|b| spent.exceeds(&b)) {
        return refusal(BUDGET_REFUSAL.to_string());
    }
    registry.dispatch_with(args, scene, &cfg.cost_model).unwrap_or_else(|e| refusal(e.observation_text()))
}
