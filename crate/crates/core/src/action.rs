//! Actions the agent can take, their arguments, and what the tools hand back.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::TokenCost;
use crate::time::TimeWindow;

/// The seven perception tools plus the terminal `ANSWER` action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    GlobalQa,
    ClipQa,
    Asr,
    GlobalCaption,
    AudioQa,
    EventList,
    EventLocation,
    Answer,
}

/// Which sense a tool exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Visual,
    Audio,
}

impl ActionKind {
    pub const ALL: [ActionKind; 8] = [
        ActionKind::GlobalQa,
        ActionKind::ClipQa,
        ActionKind::Asr,
        ActionKind::GlobalCaption,
        ActionKind::AudioQa,
        ActionKind::EventList,
        ActionKind::EventLocation,
        ActionKind::Answer,
    ];

    /// Every kind that is dispatched to a tool.
    pub const TOOLS: [ActionKind; 7] = [
        ActionKind::GlobalQa,
        ActionKind::ClipQa,
        ActionKind::Asr,
        ActionKind::GlobalCaption,
        ActionKind::AudioQa,
        ActionKind::EventList,
        ActionKind::EventLocation,
    ];

    pub fn is_tool(self) -> bool {
        self != ActionKind::Answer
    }

    pub fn modality(self) -> Option<Modality> {
        match self {
            ActionKind::GlobalQa | ActionKind::ClipQa => Some(Modality::Visual),
            ActionKind::Answer => None,
            _ => Some(Modality::Audio),
        }
    }

    /// Upper-case identifier used in traces and reports.
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::GlobalQa => "GLOBAL_QA",
            ActionKind::ClipQa => "CLIP_QA",
            ActionKind::Asr => "ASR",
            ActionKind::GlobalCaption => "GLOBAL_CAPTION",
            ActionKind::AudioQa => "AUDIO_QA",
            ActionKind::EventList => "EVENT_LIST",
            ActionKind::EventLocation => "EVENT_LOCATION",
            ActionKind::Answer => "ANSWER",
        }
    }

    /// Lower-case function name exposed to chat models.
    pub fn tool_name(self) -> &'static str {
        match self {
            ActionKind::GlobalQa => "global_qa",
            ActionKind::ClipQa => "clip_qa",
            ActionKind::Asr => "asr",
            ActionKind::GlobalCaption => "global_caption",
            ActionKind::AudioQa => "audio_qa",
            ActionKind::EventList => "event_list",
            ActionKind::EventLocation => "event_location",
            ActionKind::Answer => "answer",
        }
    }

    pub fn from_tool_name(name: &str) -> Option<ActionKind> {
        ActionKind::ALL.into_iter().find(|k| k.tool_name() == name)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s) || k.tool_name() == s)
            .ok_or_else(|| format!("unknown action kind '{s}'"))
    }
}

/// Arguments for one action. The variant is the action kind, so the two cannot disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "args", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionArgs {
    GlobalQa { question: String },
    ClipQa { question: String, window: TimeWindow },
    Asr {},
    GlobalCaption {},
    AudioQa { question: String },
    EventList {},
    EventLocation { query: String },
    Answer { answer: String },
}

impl ActionArgs {
    pub fn kind(&self) -> ActionKind {
        match self {
            ActionArgs::GlobalQa { .. } => ActionKind::GlobalQa,
            ActionArgs::ClipQa { .. } => ActionKind::ClipQa,
            ActionArgs::Asr {} => ActionKind::Asr,
            ActionArgs::GlobalCaption {} => ActionKind::GlobalCaption,
            ActionArgs::AudioQa { .. } => ActionKind::AudioQa,
            ActionArgs::EventList {} => ActionKind::EventList,
            ActionArgs::EventLocation { .. } => ActionKind::EventLocation,
            ActionArgs::Answer { .. } => ActionKind::Answer,
        }
    }

    /// The free-text part of the arguments, if any; used for text-token accounting.
    pub fn text(&self) -> Option<&str> {
        match self {
            ActionArgs::GlobalQa { question }
            | ActionArgs::ClipQa { question, .. }
            | ActionArgs::AudioQa { question } => Some(question),
            ActionArgs::EventLocation { query } => Some(query),
            ActionArgs::Answer { answer } => Some(answer),
            ActionArgs::Asr {} | ActionArgs::GlobalCaption {} | ActionArgs::EventList {} => None,
        }
    }
}

/// What a tool returns for one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub kind: ActionKind,
    pub text: String,
    /// Only populated by `EVENT_LOCATION` and `ASR`.
    pub windows: Vec<TimeWindow>,
    pub cost: TokenCost,
    pub latency_ms: u64,
}

/// A multiple-choice question posed to the agent about one piece of media.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    pub id: String,
    pub scene_id: String,
    pub question: String,
    pub choices: Vec<String>,
    /// Media length, known to the agent as metadata.
    pub duration_s: f64,
}

/// Letter label for a choice index: 0 -> "A".
pub fn choice_letter(index: usize) -> String {
    char::from(b'A' + (index % 26) as u8).to_string()
}
