use std::sync::Arc;

use super::{Tool, ToolContext, ToolError};
use crate::action::{ActionArgs, ActionKind, Modality, Observation};
use crate::cost::{estimate_audio_tokens, estimate_visual_tokens, TokenCost};
use crate::gateway::{ChatMessage, ChatRequest, GatewayClient};
use crate::scene::Scene;
use crate::time::{clamp_bounds, TimeWindow};

/// A tool answered by a remote model through the gateway. The scene id is sent as the
/// media reference; the endpoint is expected to resolve it.
#[derive(Debug, Clone)]
pub struct LiveToolBackend {
    client: Arc<GatewayClient>,
    model: String,
    timeout_ms: u64,
    max_retries: u32,
    jitter_seed: u64,
}

impl LiveToolBackend {
    pub fn new(
        client: Arc<GatewayClient>,
        model: impl Into<String>,
        timeout_ms: u64,
        max_retries: u32,
        jitter_seed: u64,
    ) -> Self {
        Self { client, model: model.into(), timeout_ms, max_retries, jitter_seed }
    }

    fn request(&self, args: &ActionArgs, scene: &Scene) -> ChatRequest {
        let kind = args.kind();
        let arguments = serde_json::to_value(args).expect("action args serialize");
        ChatRequest {
            model_name: self.model.clone(),
            system_prompt: format!(
                "You are the {} perception tool. Answer only from the referenced media, concisely. \
                 Write time windows as [start-end] in seconds.",
                kind.tool_name()
            ),
            messages: vec![ChatMessage::user(format!("media: {}\narguments: {}", scene.id, arguments["args"]))],
            tool_schemas: Vec::new(),
            reasoning_enabled: false,
            timeout_ms: self.timeout_ms,
            max_retries: self.max_retries,
        }
    }
}

/// Pulls every `[a-b]` or `[a–b]` pair of seconds out of free text.
pub(crate) fn parse_windows(text: &str, duration_s: f64) -> Vec<TimeWindow> {
    text.split('[')
        .skip(1)
        .filter_map(|chunk| {
            let inner = chunk.split_once(']')?.0;
            let (a, b) = inner.split_once(['-', '–'])?;
            let secs = |x: &str| x.trim().trim_end_matches('s').trim_end().parse::<f64>().ok();
            let (a, b) = (secs(a)?, secs(b)?);
            (a < b).then(|| clamp_bounds(a, b, duration_s))
        })
        .collect()
}

impl Tool for LiveToolBackend {
    fn call(&self, args: &ActionArgs, scene: &Scene, ctx: &ToolContext<'_>) -> Result<Observation, ToolError> {
        let kind = args.kind();
        if let ActionArgs::ClipQa { window, .. } = args {
            if window.duration() > ctx.limits.max_clip_window_s {
                return Err(ToolError::WindowTooLong {
                    duration_s: window.duration(),
                    max_s: ctx.limits.max_clip_window_s,
                });
            }
        }
        let resp = self
            .client
            .send_chat(&self.request(args, scene), self.jitter_seed)
            .map_err(|e| ToolError::Backend(e.to_string()))?;
        let text = resp.content.trim().to_string();
        let windows = match kind {
            ActionKind::EventLocation | ActionKind::Asr => parse_windows(&text, scene.duration_s),
            _ => Vec::new(),
        };
        if let ActionArgs::EventLocation { query } = args {
            if windows.is_empty() {
                return Err(ToolError::NoMatch { query: query.clone() });
            }
        }
        let media = match (kind.modality(), args) {
            (_, ActionArgs::ClipQa { window, .. }) => {
                TokenCost::new(estimate_visual_tokens(ctx.limits.clip_fps, window, ctx.cost_model), 0, 0)
            }
            (Some(Modality::Visual), _) => TokenCost::new(
                estimate_visual_tokens(ctx.limits.global_fps, &scene.full_window(), ctx.cost_model),
                0,
                0,
            ),
            _ => TokenCost::new(0, estimate_audio_tokens(&scene.full_window(), ctx.cost_model), 0),
        };
        Ok(ctx.observation(kind, text, windows, media + resp.usage))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_from_text() {
        let w = parse_windows("event 'cat meowing' at [12.0–15.5]; also [3-5] and [bad] [9-2]", 30.0);
        assert_eq!(w, vec![TimeWindow::new(12.0, 15.5).unwrap(), TimeWindow::new(3.0, 5.0).unwrap()]);
        assert!(parse_windows("nothing here", 30.0).is_empty());
        assert_eq!(parse_windows("[28-40s]", 30.0), vec![TimeWindow::new(28.0, 30.0).unwrap()]);
    }
}
