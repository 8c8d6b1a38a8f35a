//! The perception toolset: a uniform [`Tool`] interface, deterministic mock backends that
//! answer from a [`Scene`], and the [`ToolRegistry`] the agent loop dispatches through.

mod live;
mod mock;
mod registry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActionArgs, ActionKind, Observation};
use crate::cost::{CostModel, TokenCost};
use crate::retrieval::RetrievalConfig;
use crate::scene::Scene;
use crate::time::TimeWindow;

pub use live::LiveToolBackend;
pub use mock::{
    asr, audio_qa, clip_qa, dense_caption, event_list, event_locate, global_audio_caption, global_qa, DenseCaptionTool,
    MockTool, NO_AUDIO_MATCH, NO_CLIP_MATCH, NO_EVENTS, NO_SPEECH, NO_VISUAL_MATCH, VISUAL_DETAIL_LOST,
};
pub use registry::{RegistryError, ToolRegistry};

/// Sampling and window limits for the visual tools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolLimits {
    /// Frame rate of whole-video `GLOBAL_QA`.
    pub global_fps: f64,
    /// Frame rate of windowed `CLIP_QA`.
    pub clip_fps: f64,
    /// Slack allowed when testing whether a fact sits inside a clip window.
    pub containment_pad_s: f64,
    /// Longest window `CLIP_QA` accepts.
    pub max_clip_window_s: f64,
    /// Frame rate of the dense-caption baseline backend.
    pub dense_fps: f64,
}

impl Default for ToolLimits {
    fn default() -> Self {
        Self { global_fps: 2.0, clip_fps: 5.0, containment_pad_s: 1.0, max_clip_window_s: 30.0, dense_fps: 5.0 }
    }
}

/// Everything a tool needs besides its arguments and the scene.
#[derive(Debug, Clone, Copy)]
pub struct ToolContext<'a> {
    pub cost_model: &'a CostModel,
    pub retrieval: &'a RetrievalConfig,
    pub limits: &'a ToolLimits,
}

impl ToolContext<'_> {
    pub(crate) fn observation(
        &self,
        kind: ActionKind,
        text: String,
        windows: Vec<TimeWindow>,
        cost: TokenCost,
    ) -> Observation {
        Observation { kind, latency_ms: self.cost_model.latency_ms(kind, &cost), text, windows, cost }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToolError {
    #[error("no audio event matches '{query}'")]
    NoMatch { query: String },
    #[error("clip window of {duration_s} s exceeds the {max_s} s limit; localize first")]
    WindowTooLong { duration_s: f64, max_s: f64 },
    #[error("no tool bound for {0}")]
    Unbound(ActionKind),
    #[error("tool bound to {bound} received {got} arguments")]
    WrongArgs { bound: ActionKind, got: ActionKind },
    #[error("backend failure: {0}")]
    Backend(String),
}

impl ToolError {
    /// Sentinel observation text the loop records in place of a result.
    pub fn observation_text(&self) -> String {
        format!("error: {self}")
    }
}

/// One perception tool. Implementations must be pure functions of their inputs.
pub trait Tool: Send + Sync {
    fn call(&self, args: &ActionArgs, scene: &Scene, ctx: &ToolContext<'_>) -> Result<Observation, ToolError>;
}
