use serde::{Deserialize, Serialize};

use super::{
    best_choice, choice_scores, is_evidence, Planner, PlannerDecision, PlannerError, PlannerKind, INSPECT_PAD_S,
};
use crate::action::{choice_letter, ActionArgs, ActionKind, Observation, Query};
use crate::episode::Memory;
use crate::retrieval::{RetrievalConfig, Terms};
use crate::time::{clamp_window, TimeWindow};
use crate::tools::NO_EVENTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Context,
    Localize,
    Inspect,
    Decide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicState {
    pub phase: Phase,
    pub candidate_windows: Vec<TimeWindow>,
    pub extracted_keywords: Vec<String>,
    pub fallback_used: bool,
    /// Candidate windows already inspected.
    pub inspected: usize,
    /// Whether the one extra tool call after a cross-modal conflict has been spent.
    pub rechecked: bool,
}

impl Default for HeuristicState {
    fn default() -> Self {
        Self {
            phase: Phase::Context,
            candidate_windows: Vec::new(),
            extracted_keywords: Vec::new(),
            fallback_used: false,
            inspected: 0,
            rechecked: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeuristicConfig {
    /// Question tokens that route the context phase to ASR instead of the event list.
    pub speech_tokens: Vec<String>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        let words = ["say", "says", "said", "mention", "mentions", "mentioned", "speak", "speaks", "spoken"];
        Self { speech_tokens: words.into_iter().map(String::from).collect() }
    }
}

/// The coarse-to-fine finite-state policy: audio context, then event localization, then
/// high frame-rate inspection of the localized windows, then an answer.
#[derive(Debug, Clone)]
pub struct HeuristicPlanner {
    pub state: HeuristicState,
    config: HeuristicConfig,
    retrieval: RetrievalConfig,
}

impl HeuristicPlanner {
    pub fn new(config: HeuristicConfig, retrieval: RetrievalConfig) -> Self {
        Self { state: HeuristicState::default(), config, retrieval }
    }

    fn backtrack(&mut self) {
        if self.state.fallback_used {
            self.state.phase = Phase::Decide;
        } else {
            self.state.fallback_used = true;
            self.state.phase = Phase::Context;
        }
    }

    fn wants_speech(&self, q: &Query) -> bool {
        let terms = Terms::new(&q.question);
        self.config.speech_tokens.iter().any(|t| terms.contains(t))
    }

    /// Keywords for event localization: the event label best covered by the question, else
    /// the question's content terms already seen in observations, else all of them.
    fn keywords(&self, q: &Query, memory: &Memory) -> Vec<String> {
        let question = Terms::new(&q.question);
        let listed = last_observation(memory, ActionKind::EventList).filter(|o| is_evidence(o) && o.text != NO_EVENTS);
        if let Some(list) = listed {
            let mut best: Option<(f64, Terms)> = None;
            for label in list.text.split(", ") {
                let terms = Terms::new(label);
                if let Some(score) = self.retrieval.match_score(&terms, &question) {
                    if best.as_ref().is_none_or(|(s, _)| score > *s) {
                        best = Some((score, terms));
                    }
                }
            }
            if let Some((_, terms)) = best {
                return terms.iter().map(String::from).collect();
            }
        }
        let mut seen = Terms::default();
        for o in memory.entries().iter().filter_map(|e| e.observation.as_ref()).filter(|o| is_evidence(o)) {
            seen.extend_text(&o.text);
        }
        let hits: Vec<String> = question.iter().filter(|t| seen.contains(t)).map(String::from).collect();
        if hits.is_empty() {
            question.iter().map(String::from).collect()
        } else {
            hits
        }
    }

    fn step(&mut self, q: &Query, memory: &Memory) -> PlannerDecision {
        let called = |k: ActionKind| memory.entries().iter().any(|e| e.decision.action() == k);
        loop {
            match self.state.phase {
                Phase::Context if self.state.fallback_used => {
                    if !called(ActionKind::GlobalQa) {
                        return PlannerDecision::new(
                            ActionArgs::GlobalQa { question: q.question.clone() },
                            "localization failed; fall back to a global look",
                        );
                    }
                    self.state.phase = Phase::Decide;
                }
                Phase::Context => {
                    if !called(ActionKind::GlobalCaption) {
                        return PlannerDecision::new(ActionArgs::GlobalCaption {}, "establish global audio context");
                    }
                    if !called(ActionKind::Asr) && !called(ActionKind::EventList) {
                        return if self.wants_speech(q) {
                            PlannerDecision::new(ActionArgs::Asr {}, "question refers to speech")
                        } else {
                            PlannerDecision::new(ActionArgs::EventList {}, "enumerate sound events")
                        };
                    }
                    self.state.phase = Phase::Localize;
                }
                Phase::Localize => match last_observation(memory, ActionKind::EventLocation) {
                    None => {
                        let keywords = self.keywords(q, memory);
                        self.state.extracted_keywords = keywords.clone();
                        if keywords.is_empty() {
                            self.backtrack();
                        } else {
                            return PlannerDecision::new(
                                ActionArgs::EventLocation { query: keywords.join(" ") },
                                "localize the referenced sound",
                            );
                        }
                    }
                    Some(o) if !o.windows.is_empty() => {
                        self.state.candidate_windows = o.windows.clone();
                        self.state.phase = Phase::Inspect;
                    }
                    Some(_) => self.backtrack(),
                },
                Phase::Inspect => {
                    let done = self.state.inspected > 0
                        && memory
                            .last()
                            .is_some_and(|e| e.reflection.sufficient && !e.reflection.inconsistency_detected);
                    match self.state.candidate_windows.get(self.state.inspected) {
                        Some(w) if !done => {
                            self.state.inspected += 1;
                            let window = clamp_window(&w.padded(INSPECT_PAD_S), q.duration_s);
                            return PlannerDecision::new(
                                ActionArgs::ClipQa { question: q.question.clone(), window },
                                format!("inspect {window} at high frame rate"),
                            );
                        }
                        _ => self.state.phase = Phase::Decide,
                    }
                }
                Phase::Decide => {
                    let conflicted = memory.last().is_some_and(|e| e.reflection.inconsistency_detected);
                    if conflicted && !self.state.rechecked {
                        self.state.rechecked = true;
                        return PlannerDecision::new(
                            ActionArgs::AudioQa { question: q.question.clone() },
                            "audio and visual evidence disagree; recheck",
                        );
                    }
                    let choice = best_choice(&choice_scores(q, memory));
                    return PlannerDecision::new(
                        ActionArgs::Answer { answer: choice_letter(choice) },
                        "best supported choice",
                    );
                }
            }
        }
    }
}

fn last_observation(memory: &Memory, kind: ActionKind) -> Option<&Observation> {
    memory.entries().iter().rev().find(|e| e.decision.action() == kind).and_then(|e| e.observation.as_ref())
}

impl Planner for HeuristicPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Heuristic
    }

    fn decide(&mut self, q: &Query, memory: &Memory) -> Result<PlannerDecision, PlannerError> {
        Ok(self.step(q, memory))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::test_util::{memory_of, obs};

    fn planner() -> HeuristicPlanner {
        HeuristicPlanner::new(HeuristicConfig::default(), RetrievalConfig::default())
    }

    fn q(question: &str) -> Query {
        Query {
            id: "q1".into(),
            scene_id: "kitten_vlog".into(),
            question: question.into(),
            choices: vec!["Xi Le".into(), "Fu Lu".into(), "Ping An".into(), "Da Ji".into()],
            duration_s: 30.0,
        }
    }

    #[test]
    fn fresh_state_starts_with_caption() {
        let d = planner().decide(&q("anything"), &Memory::new()).unwrap();
        assert_eq!(d.args, ActionArgs::GlobalCaption {});
    }

    #[test]
    fn speech_questions_use_asr() {
        let m = memory_of(vec![(ActionArgs::GlobalCaption {}, obs(ActionKind::GlobalCaption, "street"))]);
        let mut p = planner();
        p.state.phase = Phase::Context;
        assert_eq!(p.decide(&q("What does the man say?"), &m).unwrap().args, ActionArgs::Asr {});
        let mut p = planner();
        assert_eq!(p.decide(&q("What is on the sign?"), &m).unwrap().args, ActionArgs::EventList {});
    }

    #[test]
    fn localizes_with_event_label() {
        let m = memory_of(vec![
            (ActionArgs::GlobalCaption {}, obs(ActionKind::GlobalCaption, "street market ambience")),
            (ActionArgs::EventList {}, obs(ActionKind::EventList, "cat meowing")),
        ]);
        let d = planner().decide(&q("what does the signboard say when the cat meows?"), &m).unwrap();
        assert_eq!(d.args, ActionArgs::EventLocation { query: "cat meowing".into() });
    }

    #[test]
    fn inspects_padded_window() {
        let mut located = obs(ActionKind::EventLocation, "event 'cat meowing' at [12.0–15.5]");
        located.windows = vec![TimeWindow::new(12.0, 15.5).unwrap()];
        let m = memory_of(vec![
            (ActionArgs::GlobalCaption {}, obs(ActionKind::GlobalCaption, "street")),
            (ActionArgs::EventList {}, obs(ActionKind::EventList, "cat meowing")),
            (ActionArgs::EventLocation { query: "cat meowing".into() }, located),
        ]);
        let question = q("when the cat meows what is on the signboard?");
        let d = planner().decide(&question, &m).unwrap();
        assert_eq!(
            d.args,
            ActionArgs::ClipQa { question: question.question.clone(), window: TimeWindow::new(10.0, 17.5).unwrap() }
        );
    }

    #[test]
    fn no_match_backtracks_to_global_qa_once() {
        let m = memory_of(vec![
            (ActionArgs::GlobalCaption {}, obs(ActionKind::GlobalCaption, "street")),
            (ActionArgs::EventList {}, obs(ActionKind::EventList, "dog barking")),
            (
                ActionArgs::EventLocation { query: "sign".into() },
                obs(ActionKind::EventLocation, "error: no audio event matches 'sign'"),
            ),
        ]);
        let mut p = planner();
        let question = q("What is on the sign?");
        let d = p.decide(&question, &m).unwrap();
        assert_eq!(d.args, ActionArgs::GlobalQa { question: question.question.clone() });
        assert!(p.state.fallback_used);
        assert_eq!(p.state.phase, Phase::Context);
        let mut m2 = m.clone();
        m2.push(crate::episode::MemoryEntry {
            step: 3,
            decision: d,
            observation: Some(obs(ActionKind::GlobalQa, "the sign reads 'Da Ji'")),
            reflection: crate::planner::ReflectionNote {
                sufficient: true,
                inconsistency_detected: false,
                note: String::new(),
            },
        })
        .unwrap();
        let d = p.decide(&question, &m2).unwrap();
        assert_eq!(d.args, ActionArgs::Answer { answer: "D".into() });
    }

    #[test]
    fn conflict_forces_one_recheck() {
        let mut m = Memory::new();
        m.push(crate::episode::MemoryEntry {
            step: 0,
            decision: PlannerDecision::new(ActionArgs::GlobalCaption {}, ""),
            observation: Some(obs(ActionKind::GlobalCaption, "xi le")),
            reflection: crate::planner::ReflectionNote {
                sufficient: false,
                inconsistency_detected: true,
                note: String::new(),
            },
        })
        .unwrap();
        let mut p = planner();
        p.state.phase = Phase::Decide;
        let question = q("What is on the sign?");
        assert!(matches!(p.decide(&question, &m).unwrap().args, ActionArgs::AudioQa { .. }));
        assert!(matches!(p.decide(&question, &m).unwrap().args, ActionArgs::Answer { .. }));
    }

    #[test]
    fn empty_evidence_answers_first_choice() {
        let mut p = planner();
        p.state.phase = Phase::Decide;
        assert_eq!(p.decide(&q("x"), &Memory::new()).unwrap().args, ActionArgs::Answer { answer: "A".into() });
    }

    #[test]
    fn deterministic() {
        let m = memory_of(vec![(ActionArgs::GlobalCaption {}, obs(ActionKind::GlobalCaption, "street"))]);
        let (mut a, mut b) = (planner(), planner());
        for _ in 0..3 {
            assert_eq!(a.decide(&q("what is it?"), &m).unwrap(), b.decide(&q("what is it?"), &m).unwrap());
            assert_eq!(a.state, b.state);
        }
    }
}
