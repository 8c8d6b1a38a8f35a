//! The simulated audio-video world that mock tools answer from.
//!
//! A [`Scene`] carries timed audio events, speech segments and visual facts. Visual facts
//! come in two granularities: `COARSE` facts survive sparse whole-video sampling, `FINE`
//! facts are only visible to a high frame-rate look at a short window.

mod format;
mod generate;
mod oracle;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::TimeWindow;

pub use format::{
    load_questions, load_scene, load_suite, parse_questions, parse_scene, questions_to_json, scene_to_json,
    write_suite, QuestionsDoc, SceneError, Suite, SuiteManifest, FORMAT_VERSION, MANIFEST_FILE,
};
pub use generate::{generate_suite, GenerationError, GeneratorProfile};
pub use oracle::{oracle_answer, OracleError};

/// Minimum frame rate a `FINE` fact may demand.
pub const FINE_MIN_FPS: f64 = 3.0;
/// Longest query window a `FINE` fact tolerates.
pub const FINE_MAX_WINDOW_S: f64 = 30.0;
/// Highest frame rate a `COARSE` fact may demand.
pub const COARSE_MAX_FPS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioEvent {
    pub id: String,
    pub label: String,
    pub window: TimeWindow,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechSegment {
    pub window: TimeWindow,
    pub transcript: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Granularity {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualFact {
    pub id: String,
    pub window: TimeWindow,
    pub statement: String,
    pub granularity: Granularity,
    pub min_fps: f64,
    pub max_query_window_s: f64,
}

impl VisualFact {
    /// Whether a clip inspection of `window` at `fps` can see this fact.
    ///
    /// Three gates: the fact lies inside the window widened by `pad_s`, the clip is sampled
    /// at least at `min_fps`, and the window is no longer than `max_query_window_s`.
    pub fn visible_in(&self, window: &TimeWindow, fps: f64, pad_s: f64) -> bool {
        window.contains_padded(&self.window, pad_s)
            && fps >= self.min_fps
            && window.duration() <= self.max_query_window_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub duration_s: f64,
    pub audio_events: Vec<AudioEvent>,
    pub speech_segments: Vec<SpeechSegment>,
    pub visual_facts: Vec<VisualFact>,
    pub global_audio_summary: String,
    pub global_visual_summary: String,
}

/// An invariant violation, naming the offending field by path.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

/// What a `required_fact_ids` entry resolves to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneItem<'a> {
    Event(&'a AudioEvent),
    Fact(&'a VisualFact),
}

impl Scene {
    pub fn full_window(&self) -> TimeWindow {
        TimeWindow::new(0.0, self.duration_s).expect("validated scene has positive duration")
    }

    pub fn find(&self, id: &str) -> Option<SceneItem<'_>> {
        if let Some(e) = self.audio_events.iter().find(|e| e.id == id) {
            return Some(SceneItem::Event(e));
        }
        self.visual_facts.iter().find(|f| f.id == id).map(SceneItem::Fact)
    }

    /// Every piece of free text in the scene.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.audio_events
            .iter()
            .flat_map(|e| [e.label.as_str(), e.description.as_str()])
            .chain(self.speech_segments.iter().map(|s| s.transcript.as_str()))
            .chain(self.visual_facts.iter().map(|f| f.statement.as_str()))
            .chain([self.global_audio_summary.as_str(), self.global_visual_summary.as_str()])
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.id.trim().is_empty() {
            return Err(ValidationError::new("id", "must be non-empty"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ValidationError::new("duration_s", "must be a positive number"));
        }
        let within = |field: String, w: &TimeWindow| {
            if w.end_s() > self.duration_s {
                Err(ValidationError::new(field, format!("window {w} extends past scene duration {}", self.duration_s)))
            } else {
                Ok(())
            }
        };
        let mut ids = HashSet::new();
        let mut prev_start = f64::NEG_INFINITY;
        for (i, e) in self.audio_events.iter().enumerate() {
            let at = format!("audio_events[{i}]");
            if e.id.trim().is_empty() {
                return Err(ValidationError::new(format!("{at}.id"), "must be non-empty"));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(ValidationError::new(format!("{at}.id"), format!("duplicate id '{}'", e.id)));
            }
            if e.label.trim().is_empty() {
                return Err(ValidationError::new(format!("{at}.label"), "must be non-empty"));
            }
            within(format!("{at}.window"), &e.window)?;
            if e.window.start_s() < prev_start {
                return Err(ValidationError::new(
                    format!("{at}.window"),
                    "audio events must be sorted ascending by start_s",
                ));
            }
            prev_start = e.window.start_s();
        }
        for (i, s) in self.speech_segments.iter().enumerate() {
            let at = format!("speech_segments[{i}]");
            if s.transcript.trim().is_empty() {
                return Err(ValidationError::new(format!("{at}.transcript"), "must be non-empty"));
            }
            within(format!("{at}.window"), &s.window)?;
        }
        for (i, f) in self.visual_facts.iter().enumerate() {
            let at = format!("visual_facts[{i}]");
            if f.id.trim().is_empty() {
                return Err(ValidationError::new(format!("{at}.id"), "must be non-empty"));
            }
            if !ids.insert(f.id.as_str()) {
                return Err(ValidationError::new(format!("{at}.id"), format!("duplicate id '{}'", f.id)));
            }
            if f.statement.trim().is_empty() {
                return Err(ValidationError::new(format!("{at}.statement"), "must be non-empty"));
            }
            within(format!("{at}.window"), &f.window)?;
            if !(f.min_fps.is_finite() && f.min_fps > 0.0) {
                return Err(ValidationError::new(format!("{at}.min_fps"), "must be positive"));
            }
            match f.granularity {
                Granularity::Fine => {
                    if f.min_fps < FINE_MIN_FPS {
                        return Err(ValidationError::new(
                            format!("{at}.min_fps"),
                            format!("FINE facts need min_fps >= {FINE_MIN_FPS}"),
                        ));
                    }
                    if !(f.max_query_window_s > 0.0 && f.max_query_window_s <= FINE_MAX_WINDOW_S) {
                        return Err(ValidationError::new(
                            format!("{at}.max_query_window_s"),
                            format!("FINE facts need 0 < max_query_window_s <= {FINE_MAX_WINDOW_S}"),
                        ));
                    }
                }
                Granularity::Coarse => {
                    if f.min_fps > COARSE_MAX_FPS {
                        return Err(ValidationError::new(
                            format!("{at}.min_fps"),
                            format!("COARSE facts need min_fps <= {COARSE_MAX_FPS}"),
                        ));
                    }
                    if f.max_query_window_s != self.duration_s {
                        return Err(ValidationError::new(
                            format!("{at}.max_query_window_s"),
                            "COARSE facts must allow the whole scene duration",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One multiple-choice item with its answer key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionItem {
    pub id: String,
    pub scene_id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub answer_index: usize,
    pub required_fact_ids: Vec<String>,
    pub requires_cross_modal: bool,
}

pub const CHOICES_PER_QUESTION: usize = 4;

impl QuestionItem {
    /// Structural checks; `scene` enables the cross-modal reference check.
    pub fn validate(&self, scene: Option<&Scene>) -> Result<(), ValidationError> {
        if self.question.trim().is_empty() {
            return Err(ValidationError::new("question", "must be non-empty"));
        }
        if self.choices.len() != CHOICES_PER_QUESTION {
            return Err(ValidationError::new(
                "choices",
                format!("expected {CHOICES_PER_QUESTION} choices, found {}", self.choices.len()),
            ));
        }
        let distinct: HashSet<_> = self.choices.iter().collect();
        if distinct.len() != self.choices.len() {
            return Err(ValidationError::new("choices", "choices must be pairwise distinct"));
        }
        if self.answer_index >= self.choices.len() {
            return Err(ValidationError::new("answer_index", "out of range"));
        }
        if let Some(scene) = scene {
            if scene.id != self.scene_id {
                return Err(ValidationError::new("scene_id", "does not match the scene"));
            }
            if self.requires_cross_modal {
                let mut audio = false;
                let mut fine = false;
                for id in &self.required_fact_ids {
                    match scene.find(id) {
                        Some(SceneItem::Event(_)) => audio = true,
                        Some(SceneItem::Fact(f)) if f.granularity == Granularity::Fine => fine = true,
                        _ => {}
                    }
                }
                if !(audio && fine) {
                    return Err(ValidationError::new(
                        "required_fact_ids",
                        "cross-modal questions must reference an audio event and a FINE fact",
                    ));
                }
            }
        }
        Ok(())
    }

    /// The query handed to the agent (no answer key).
    pub fn to_query(&self, scene: &Scene) -> crate::action::Query {
        crate::action::Query {
            id: self.id.clone(),
            scene_id: self.scene_id.clone(),
            question: self.question.clone(),
            choices: self.choices.clone(),
            duration_s: scene.duration_s,
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn w(a: f64, b: f64) -> TimeWindow {
        TimeWindow::new(a, b).unwrap()
    }

    /// An in-memory copy of the kitten vlog fixture.
    pub fn kitten() -> Scene {
        parse_scene(include_str!("../../../../fixtures/scenes/kitten_vlog.scene.json"), "kitten")
            .expect("fixture parses")
    }
}
