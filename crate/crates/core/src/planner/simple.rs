use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{best_choice, choice_scores, Planner, PlannerDecision, PlannerError, PlannerKind};
use crate::action::{choice_letter, ActionArgs, ActionKind, Query};
use crate::episode::Memory;
use crate::retrieval::RetrievalConfig;
use crate::time::clamp_bounds;

/// Returns a fixed script of decisions, one per step.
#[derive(Debug, Clone)]
pub struct ReplayPlanner {
    script: Vec<PlannerDecision>,
}

impl ReplayPlanner {
    pub fn new(script: Vec<PlannerDecision>) -> Self {
        Self { script }
    }
}

/// `script[step]`, or `ScriptExhausted` past its end.
pub fn replay_decide(script: &[PlannerDecision], step: usize) -> Result<PlannerDecision, PlannerError> {
    script.get(step).cloned().ok_or(PlannerError::ScriptExhausted { step })
}

impl Planner for ReplayPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Replay
    }

    fn decide(&mut self, _q: &Query, memory: &Memory) -> Result<PlannerDecision, PlannerError> {
        replay_decide(&self.script, memory.len())
    }
}

/// Uniformly random tool calls for 0 to 4 steps, then a uniformly random choice.
#[derive(Debug, Clone)]
pub struct RandomPlanner {
    rng: ChaCha8Rng,
    tool_steps: Option<usize>,
}

impl RandomPlanner {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), tool_steps: None }
    }

    fn random_tool(&mut self, q: &Query) -> ActionArgs {
        let kind = ActionKind::TOOLS[self.rng.gen_range(0..ActionKind::TOOLS.len())];
        let question = q.question.clone();
        match kind {
            ActionKind::GlobalQa => ActionArgs::GlobalQa { question },
            ActionKind::ClipQa => {
                let start = (self.rng.gen_range(0..(q.duration_s.max(1.0) as u32 * 2)) as f64) / 2.0;
                let len = self.rng.gen_range(2..=20) as f64;
                ActionArgs::ClipQa { question, window: clamp_bounds(start, start + len, q.duration_s) }
            }
            ActionKind::Asr => ActionArgs::Asr {},
            ActionKind::GlobalCaption => ActionArgs::GlobalCaption {},
            ActionKind::AudioQa => ActionArgs::AudioQa { question },
            ActionKind::EventList => ActionArgs::EventList {},
            ActionKind::EventLocation | ActionKind::Answer => ActionArgs::EventLocation { query: question },
        }
    }
}

impl Planner for RandomPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Random
    }

    fn decide(&mut self, q: &Query, memory: &Memory) -> Result<PlannerDecision, PlannerError> {
        let steps = *self.tool_steps.get_or_insert_with(|| self.rng.gen_range(0..=4));
        if memory.len() < steps {
            return Ok(PlannerDecision::new(self.random_tool(q), "random exploration"));
        }
        let choice = self.rng.gen_range(0..q.choices.len().max(1));
        Ok(PlannerDecision::new(ActionArgs::Answer { answer: choice_letter(choice) }, "random guess"))
    }
}

/// Never answers: cycles through the tools forever.
#[derive(Debug, Clone, Default)]
pub struct AdversarialPlanner;

impl Planner for AdversarialPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Adversarial
    }

    fn decide(&mut self, q: &Query, memory: &Memory) -> Result<PlannerDecision, PlannerError> {
        let args = match ActionKind::TOOLS[memory.len() % ActionKind::TOOLS.len()] {
            ActionKind::GlobalQa => ActionArgs::GlobalQa { question: q.question.clone() },
            ActionKind::ClipQa => ActionArgs::ClipQa {
                question: q.question.clone(),
                window: clamp_bounds(0.0, q.duration_s.min(10.0), q.duration_s),
            },
            ActionKind::Asr => ActionArgs::Asr {},
            ActionKind::GlobalCaption => ActionArgs::GlobalCaption {},
            ActionKind::AudioQa => ActionArgs::AudioQa { question: q.question.clone() },
            ActionKind::EventList => ActionArgs::EventList {},
            ActionKind::EventLocation | ActionKind::Answer => ActionArgs::EventLocation { query: q.question.clone() },
        };
        Ok(PlannerDecision::new(args, "keep looking"))
    }
}

/// The fixed dense-caption policy: caption everything, transcribe, then answer by retrieval.
/// Pair it with a registry whose `GLOBAL_QA` is the dense-caption backend.
#[derive(Debug, Clone, Default)]
pub struct DensePlanner {
    retrieval: RetrievalConfig,
}

impl DensePlanner {
    pub fn new(retrieval: RetrievalConfig) -> Self {
        Self { retrieval }
    }
}

impl Planner for DensePlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Dense
    }

    fn decide(&mut self, q: &Query, memory: &Memory) -> Result<PlannerDecision, PlannerError> {
        Ok(match memory.len() {
            0 => PlannerDecision::new(ActionArgs::GlobalQa { question: q.question.clone() }, "caption the whole video"),
            1 => PlannerDecision::new(ActionArgs::Asr {}, "transcribe speech"),
            _ => {
                let scores = choice_scores(q, memory);
                let threshold = self.retrieval.match_threshold();
                let supported: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= threshold).collect();
                let (answer, rationale) = match supported.as_slice() {
                    [only] => (*only, "retrieve over captions"),
                    _ => (best_choice(&scores), "no unique caption match; best partial match"),
                };
                PlannerDecision::new(ActionArgs::Answer { answer: choice_letter(answer) }, rationale)
            }
        })
    }
}
