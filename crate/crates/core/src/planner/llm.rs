use std::sync::Arc;

use super::{Planner, PlannerDecision, PlannerError, PlannerKind};
use crate::action::{choice_letter, Query};
use crate::episode::Memory;
use crate::gateway::{parse_decision, planner_system_prompt, tool_schemas, ChatMessage, ChatRequest, GatewayClient};

const FORMAT_REMINDER: &str = "Your last reply could not be read. Reply with exactly one tool call, or a fenced \
JSON block {\"name\": \"<tool>\", \"arguments\": {...}}, or a line \"ANSWER: <letter>\".";

/// A planner backed by a remote model. The planner model may reason; tool backends may not.
#[derive(Debug, Clone)]
pub struct LlmPlanner {
    client: Arc<GatewayClient>,
    model: String,
    timeout_ms: u64,
    max_retries: u32,
    jitter_seed: u64,
}

impl LlmPlanner {
    pub fn new(
        client: Arc<GatewayClient>,
        model: impl Into<String>,
        timeout_ms: u64,
        max_retries: u32,
        jitter_seed: u64,
    ) -> Self {
        Self { client, model: model.into(), timeout_ms, max_retries, jitter_seed }
    }

    /// The conversation sent for the next decision.
    pub fn request(&self, q: &Query, memory: &Memory) -> ChatRequest {
        let choices: Vec<String> =
            q.choices.iter().enumerate().map(|(i, c)| format!("({}) {c}", choice_letter(i))).collect();
        let mut messages = vec![ChatMessage::user(format!(
            "Question: {}\nChoices: {}\nVideo duration: {} s",
            q.question,
            choices.join(" "),
            q.duration_s
        ))];
        for e in memory.entries() {
            let args = serde_json::to_value(&e.decision.args).expect("action args serialize");
            messages.push(ChatMessage::assistant(format!(
                "step {}: call {} {}",
                e.step,
                e.decision.action().tool_name(),
                args["args"]
            )));
            if let Some(o) = &e.observation {
                messages.push(ChatMessage::user(format!("observation: {}\nreflection: {}", o.text, e.reflection.note)));
            }
        }
        ChatRequest {
            model_name: self.model.clone(),
            system_prompt: planner_system_prompt().to_string(),
            messages,
            tool_schemas: tool_schemas().to_vec(),
            reasoning_enabled: true,
            timeout_ms: self.timeout_ms,
            max_retries: self.max_retries,
        }
    }
}

/// One planning call: send the transcript, parse the reply, and reprompt once on failure.
pub fn llm_decide(planner: &LlmPlanner, q: &Query, memory: &Memory) -> Result<PlannerDecision, PlannerError> {
    let mut req = planner.request(q, memory);
    let seed = planner.jitter_seed ^ memory.len() as u64;
    let resp = planner.client.send_chat(&req, seed)?;
    match parse_decision(&resp, tool_schemas()) {
        Ok(d) => Ok(d),
        Err(_) => {
            req.messages.push(ChatMessage::assistant(resp.content));
            req.messages.push(ChatMessage::user(FORMAT_REMINDER));
            let resp = planner.client.send_chat(&req, seed.rotate_left(17))?;
            Ok(parse_decision(&resp, tool_schemas())?)
        }
    }
}

impl Planner for LlmPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Llm
    }

    fn decide(&mut self, q: &Query, memory: &Memory) -> Result<PlannerDecision, PlannerError> {
        llm_decide(self, q, memory)
    }
}
