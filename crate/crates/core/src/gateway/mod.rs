//! Chat-completion gateway used by the live planner and live tool backends.
//!
//! One generic JSON wire format, with a per-provider adapter for the
//! OpenAI-style dialect. Credentials come only from [`API_KEY_ENV`] and travel only in
//! the `Authorization` header.

mod client;
mod parse;
pub mod stub;
mod wire;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::TokenCost;

pub use client::{Credentials, GatewayClient, GatewayConfig, RecordingSleeper, RetryPolicy, Sleeper, ThreadSleeper};
pub use parse::{parse_decision, DecisionParseError};
pub use wire::Provider;

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "OMNILOOP_API_KEY";

const TOOL_SCHEMAS_JSON: &str = include_str!("../../assets/tool_schemas.json");
const PLANNER_PROMPT: &str = include_str!("../../assets/planner_prompt.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// A function the model may call, with a JSON-schema subset for its arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: serde_json::Value,
}

/// The bundled descriptors for all seven tools plus `answer`.
pub fn tool_schemas() -> &'static [ToolSchema] {
    static SCHEMAS: OnceLock<Vec<ToolSchema>> = OnceLock::new();
    SCHEMAS.get_or_init(|| serde_json::from_str(TOOL_SCHEMAS_JSON).expect("bundled tool schemas parse"))
}

/// The bundled planner system prompt.
pub fn planner_system_prompt() -> &'static str {
    PLANNER_PROMPT
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_name: String,
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    pub tool_schemas: Vec<ToolSchema>,
    /// Off for tool backends: they answer directly without internal chain-of-thought.
    pub reasoning_enabled: bool,
    pub timeout_ms: u64,
    pub max_retries: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RequestError {
    #[error("chat request needs at least one message")]
    NoMessages,
    #[error("chat request timeout must be positive")]
    ZeroTimeout,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), RequestError> {
        if self.messages.is_empty() {
            return Err(RequestError::NoMessages);
        }
        if self.timeout_ms == 0 {
            return Err(RequestError::ZeroTimeout);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolCall {
    pub name: String,
    pub arguments: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResponseStatus {
    Ok,
    RateLimited,
    TransportError,
    Malformed,
}

impl ResponseStatus {
    pub fn is_retryable(self) -> bool {
        matches!(self, ResponseStatus::RateLimited | ResponseStatus::TransportError)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    /// Only present when `status` is `Ok`.
    pub tool_call: Option<ToolCall>,
    pub usage: TokenCost,
    pub status: ResponseStatus,
}

impl ChatResponse {
    pub(crate) fn failed(status: ResponseStatus, detail: impl Into<String>) -> Self {
        Self { content: detail.into(), tool_call: None, usage: TokenCost::ZERO, status }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("gateway request failed with {status:?} after {attempts} attempt(s): {detail}")]
    Failed { status: ResponseStatus, attempts: u32, detail: String },
    #[error("invalid chat request: {0}")]
    Request(#[from] RequestError),
}

impl GatewayError {
    pub fn status(&self) -> Option<ResponseStatus> {
        match self {
            GatewayError::Failed { status, .. } => Some(*status),
            GatewayError::Request(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionKind;

    #[test]
    fn schemas_cover_every_action() {
        let names: Vec<&str> = tool_schemas().iter().map(|s| s.name.as_str()).collect();
        for kind in ActionKind::ALL {
            assert!(names.contains(&kind.tool_name()), "{kind}");
        }
        assert_eq!(names.len(), ActionKind::ALL.len());
    }

    #[test]
    fn prompt_is_versioned() {
        assert!(planner_system_prompt().starts_with("# omniloop planner prompt v1"));
    }

    #[test]
    fn request_validation() {
        let mut r = ChatRequest {
            model_name: "m".into(),
            system_prompt: String::new(),
            messages: vec![],
            tool_schemas: vec![],
            reasoning_enabled: false,
            timeout_ms: 10,
            max_retries: 0,
        };
        assert_eq!(r.validate(), Err(RequestError::NoMessages));
        r.messages.push(ChatMessage::user("hi"));
        r.timeout_ms = 0;
        assert_eq!(r.validate(), Err(RequestError::ZeroTimeout));
    }
}
