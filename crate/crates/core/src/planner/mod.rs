//! Policies that choose the next action, and the reflection step that grades the evidence
//! gathered so far.

mod heuristic;
mod llm;
mod simple;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{choice_letter, ActionArgs, ActionKind, Modality, Observation, Query};
use crate::episode::Memory;
use crate::gateway::{DecisionParseError, GatewayError};
use crate::retrieval::{RetrievalConfig, Terms};

pub use heuristic::{HeuristicConfig, HeuristicPlanner, HeuristicState, Phase};
pub use llm::{llm_decide, LlmPlanner};
pub use simple::{replay_decide, AdversarialPlanner, DensePlanner, RandomPlanner, ReplayPlanner};

/// Seconds added on each side of a localized event before inspecting it.
pub const INSPECT_PAD_S: f64 = 2.0;

/// One planner output: an action with its arguments and a short free-text rationale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerDecision {
    #[serde(flatten)]
    pub args: ActionArgs,
    pub rationale: String,
}

impl PlannerDecision {
    pub fn new(args: ActionArgs, rationale: impl Into<String>) -> Self {
        Self { args, rationale: rationale.into() }
    }

    pub fn action(&self) -> ActionKind {
        self.args.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectionNote {
    pub sufficient: bool,
    pub inconsistency_detected: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("replay script exhausted at step {step}")]
    ScriptExhausted { step: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("model output could not be parsed after a reprompt: {0}")]
    DecisionParse(#[from] DecisionParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Heuristic,
    Replay,
    Random,
    Adversarial,
    Dense,
    Llm,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 6] = [
        PlannerKind::Heuristic,
        PlannerKind::Replay,
        PlannerKind::Random,
        PlannerKind::Adversarial,
        PlannerKind::Dense,
        PlannerKind::Llm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Heuristic => "heuristic",
            PlannerKind::Replay => "replay",
            PlannerKind::Random => "random",
            PlannerKind::Adversarial => "adversarial",
            PlannerKind::Dense => "dense",
            PlannerKind::Llm => "llm",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown planner '{s}'"))
    }
}

/// A policy over (query, memory). Stateful planners keep per-episode state, so an instance
/// must not be shared between episodes.
pub trait Planner {
    fn kind(&self) -> PlannerKind;
    fn decide(&mut self, q: &Query, memory: &Memory) -> Result<PlannerDecision, PlannerError>;
}

/// Tool failures and budget rejections carry no evidence about the answer.
pub(crate) fn is_evidence(o: &Observation) -> bool {
    !o.text.starts_with("error: ") && !o.text.starts_with("budget: ")
}

fn choice_terms(q: &Query) -> Vec<Terms> {
    q.choices.iter().map(|c| Terms::new(c)).collect()
}

/// Grades the evidence in `memory` plus `latest`, the observation about to be appended.
pub fn reflect(q: &Query, memory: &Memory, latest: &Observation, retrieval: &RetrievalConfig) -> ReflectionNote {
    let step = memory.len();
    let past = memory.entries().iter().filter_map(|e| e.observation.as_ref().map(|o| (e.step, o)));
    assess(q, past.chain(std::iter::once((step, latest))), retrieval)
}

/// Grades the evidence already in `memory`.
pub fn reflect_memory(q: &Query, memory: &Memory, retrieval: &RetrievalConfig) -> ReflectionNote {
    assess(q, memory.entries().iter().filter_map(|e| e.observation.as_ref().map(|o| (e.step, o))), retrieval)
}

struct Support {
    step: usize,
    modality: Option<Modality>,
    choice: usize,
}

fn assess<'a>(
    q: &Query,
    observations: impl Iterator<Item = (usize, &'a Observation)>,
    retrieval: &RetrievalConfig,
) -> ReflectionNote {
    let choices = choice_terms(q);
    let mut support = Vec::new();
    for (step, o) in observations.filter(|(_, o)| is_evidence(o)) {
        let doc = Terms::new(&o.text);
        for (choice, terms) in choices.iter().enumerate() {
            if retrieval.matches(terms, &doc) {
                support.push(Support { step, modality: o.kind.modality(), choice });
            }
        }
    }
    let supported: BTreeSet<usize> = support.iter().map(|s| s.choice).collect();
    let conflict = support
        .iter()
        .find_map(|a| support.iter().find(|b| a.modality != b.modality && a.choice != b.choice).map(|b| (a, b)));
    let sufficient = supported.len() == 1;
    let note = if let Some((a, b)) = conflict {
        format!(
            "conflict: step {} ({}) supports {} but step {} ({}) supports {}",
            a.step,
            modality_name(a.modality),
            choice_letter(a.choice),
            b.step,
            modality_name(b.modality),
            choice_letter(b.choice)
        )
    } else if sufficient {
        let steps: Vec<String> = support.iter().map(|s| s.step.to_string()).collect();
        format!("choice {} supported by steps [{}]", choice_letter(support[0].choice), steps.join(", "))
    } else if supported.is_empty() {
        "no observation supports any choice".to_string()
    } else {
        let letters: Vec<String> = supported.iter().map(|&c| choice_letter(c)).collect();
        format!("ambiguous: choices {} are all supported", letters.join(", "))
    };
    ReflectionNote { sufficient: sufficient && conflict.is_none(), inconsistency_detected: conflict.is_some(), note }
}

fn modality_name(m: Option<Modality>) -> &'static str {
    match m {
        Some(Modality::Visual) => "visual",
        Some(Modality::Audio) => "audio",
        None => "none",
    }
}

/// Per-choice evidence score: the best coverage of the choice's terms by any observation.
pub fn choice_scores(q: &Query, memory: &Memory) -> Vec<f64> {
    let docs: Vec<Terms> = memory
        .entries()
        .iter()
        .filter_map(|e| e.observation.as_ref())
        .filter(|o| is_evidence(o))
        .map(|o| Terms::new(&o.text))
        .collect();
    choice_terms(q).iter().map(|c| docs.iter().map(|d| c.coverage_by(d)).fold(0.0, f64::max)).collect()
}

/// Highest-scoring choice, lowest index on ties. With no evidence this is choice 0.
pub fn best_choice(scores: &[f64]) -> usize {
    scores.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &s)| if s > best.1 { (i, s) } else { best }).0
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use crate::cost::TokenCost;
    use crate::episode::MemoryEntry;

    pub fn obs(kind: ActionKind, text: &str) -> Observation {
        Observation { kind, text: text.into(), windows: vec![], cost: TokenCost::ZERO, latency_ms: 0 }
    }

    pub fn query() -> Query {
        Query {
            id: "q".into(),
            scene_id: "s".into(),
            question: "What text is on the sign?".into(),
            choices: vec!["Xi Le".into(), "Fu Lu".into(), "Ping An".into(), "Da Ji".into()],
            duration_s: 30.0,
        }
    }

    pub fn memory_of(observations: Vec<(ActionArgs, Observation)>) -> Memory {
        let mut m = Memory::new();
        for (args, o) in observations {
            let step = m.len();
            m.push(MemoryEntry {
                step,
                decision: PlannerDecision::new(args, ""),
                observation: Some(o),
                reflection: ReflectionNote { sufficient: false, inconsistency_detected: false, note: String::new() },
            })
            .unwrap();
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    fn r() -> RetrievalConfig {
        RetrievalConfig::default()
    }

    #[test]
    fn single_supported_choice_is_sufficient() {
        let m = memory_of(vec![(ActionArgs::GlobalCaption {}, obs(ActionKind::GlobalCaption, "street noise"))]);
        let n = reflect(&query(), &m, &obs(ActionKind::ClipQa, "the sign reads 'Fu Lu'"), &r());
        assert!(n.sufficient);
        assert!(!n.inconsistency_detected);
        assert_eq!(n.note, "choice B supported by steps [1]");
    }

    #[test]
    fn cross_modal_conflict() {
        let m = memory_of(vec![(
            ActionArgs::AudioQa { question: "x".into() },
            obs(ActionKind::AudioQa, "someone says xi le"),
        )]);
        let n = reflect(&query(), &m, &obs(ActionKind::ClipQa, "the sign reads 'Ping An'"), &r());
        assert!(n.inconsistency_detected);
        assert!(!n.sufficient);
        assert!(n.note.contains("supports A") && n.note.contains("supports C"), "{}", n.note);
    }

    #[test]
    fn no_support() {
        let n = reflect(&query(), &Memory::new(), &obs(ActionKind::Asr, "no speech detected"), &r());
        assert!(!n.sufficient && !n.inconsistency_detected);
    }

    #[test]
    fn same_modality_disagreement_is_ambiguous_not_inconsistent() {
        let m = memory_of(vec![(ActionArgs::Asr {}, obs(ActionKind::Asr, "xi le"))]);
        let n = reflect(&query(), &m, &obs(ActionKind::AudioQa, "da ji"), &r());
        assert!(!n.sufficient && !n.inconsistency_detected);
        assert!(n.note.starts_with("ambiguous"));
    }

    #[test]
    fn error_observations_are_not_evidence() {
        let n = reflect(
            &query(),
            &Memory::new(),
            &obs(ActionKind::EventLocation, "error: no audio event matches 'fu lu'"),
            &r(),
        );
        assert!(!n.sufficient);
    }

    #[test]
    fn best_choice_ties_go_low() {
        assert_eq!(best_choice(&[0.0, 0.0, 0.0, 0.0]), 0);
        assert_eq!(best_choice(&[0.0, 0.5, 0.5, 0.0]), 1);
        assert_eq!(best_choice(&[0.0, 0.5, 1.0, 0.0]), 2);
    }

    #[test]
    fn decision_serializes_flat() {
        let d = PlannerDecision::new(ActionArgs::EventLocation { query: "cat meowing".into() }, "why");
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"action":"EVENT_LOCATION","args":{"query":"cat meowing"},"rationale":"why"}"#);
        assert_eq!(serde_json::from_str::<PlannerDecision>(&s).unwrap(), d);
        let e = PlannerDecision::new(ActionArgs::Asr {}, "");
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<PlannerDecision>(&s).unwrap(), e);
    }
}
