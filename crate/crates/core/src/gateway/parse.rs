use serde_json::{Map, Value};
use thiserror::Error;

use super::{ChatResponse, ResponseStatus, ToolSchema};
use crate::action::{ActionArgs, ActionKind};
use crate::planner::PlannerDecision;
use crate::time::TimeWindow;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecisionParseError {
    #[error("response status is {0:?}, not OK")]
    NotOk(ResponseStatus),
    #[error("unknown tool '{0}'")]
    UnknownTool(String),
    #[error("arguments for '{tool}' are invalid: {reason}")]
    InvalidArguments { tool: String, reason: String },
    #[error("response has no tool call, fenced JSON block or ANSWER line")]
    NoDecision,
}

/// Extracts the planner decision from a model response.
///
/// Order: the structured tool call, then the first fenced block that holds a JSON object
/// with a `name`, then a line of the form `ANSWER: X`.
pub fn parse_decision(resp: &ChatResponse, tools: &[ToolSchema]) -> Result<PlannerDecision, DecisionParseError> {
    if resp.status != ResponseStatus::Ok {
        return Err(DecisionParseError::NotOk(resp.status));
    }
    let rationale = resp.content.trim().to_string();
    if let Some(call) = &resp.tool_call {
        let args = to_action(&call.name, &call.arguments, tools)?;
        return Ok(PlannerDecision { args, rationale });
    }
    if let Some((name, arguments)) = fenced_call(&resp.content) {
        let args = to_action(&name, &arguments, tools)?;
        return Ok(PlannerDecision { args, rationale });
    }
    if let Some(answer) = answer_line(&resp.content) {
        return Ok(PlannerDecision { args: ActionArgs::Answer { answer }, rationale });
    }
    Err(DecisionParseError::NoDecision)
}

fn fenced_blocks(text: &str) -> impl Iterator<Item = &str> {
    text.split("```").skip(1).step_by(2).map(|block| {
        // Drop an info string such as `json` on the opening fence line.
        match block.split_once('\n') {
            Some((first, rest)) if !first.trim_start().starts_with('{') => rest,
            _ => block,
        }
    })
}

fn fenced_call(text: &str) -> Option<(String, Value)> {
    fenced_blocks(text).find_map(|block| {
        let Ok(Value::Object(mut obj)) = serde_json::from_str::<Value>(block.trim()) else {
            return None;
        };
        let Some(Value::String(name)) = obj.remove("name") else {
            return None;
        };
        let arguments = obj.remove("arguments").unwrap_or_else(|| Value::Object(Map::new()));
        Some((name, arguments))
    })
}

fn answer_line(text: &str) -> Option<String> {
    text.lines().find_map(|line| {
        let line = line.trim();
        let head = line.get(..7)?;
        if !head.eq_ignore_ascii_case("answer:") {
            return None;
        }
        let rest = line[7..].trim();
        (!rest.is_empty()).then(|| rest.to_string())
    })
}

fn invalid(tool: &str, reason: impl Into<String>) -> DecisionParseError {
    DecisionParseError::InvalidArguments { tool: tool.to_string(), reason: reason.into() }
}

/// Checks `value` against the schema subset used by the bundled tool descriptors:
/// `type` (object, string, number), `properties`, `required` and `additionalProperties: false`.
fn validate(schema: &Value, value: &Value, path: &str) -> Result<(), String> {
    let ty = schema.get("type").and_then(Value::as_str).unwrap_or("object");
    match ty {
        "string" if value.is_string() => Ok(()),
        "number" if value.is_number() => Ok(()),
        "object" => {
            let obj = value.as_object().ok_or_else(|| format!("{path} must be an object"))?;
            let props = schema.get("properties").and_then(Value::as_object);
            let required = schema.get("required").and_then(Value::as_array).into_iter().flatten();
            for key in required.filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    return Err(format!("{path}.{key} is required"));
                }
            }
            let closed = schema.get("additionalProperties") == Some(&Value::Bool(false));
            for (key, v) in obj {
                match props.and_then(|p| p.get(key)) {
                    Some(sub) => validate(sub, v, &format!("{path}.{key}"))?,
                    None if closed => return Err(format!("{path}.{key} is not allowed")),
                    None => {}
                }
            }
            Ok(())
        }
        other => Err(format!("{path} must be a {other}")),
    }
}

fn to_action(name: &str, arguments: &Value, tools: &[ToolSchema]) -> Result<ActionArgs, DecisionParseError> {
    let schema =
        tools.iter().find(|t| t.name == name).ok_or_else(|| DecisionParseError::UnknownTool(name.to_string()))?;
    let kind = ActionKind::from_tool_name(name).ok_or_else(|| DecisionParseError::UnknownTool(name.to_string()))?;
    validate(&schema.parameters, arguments, "arguments").map_err(|r| invalid(name, r))?;

    let text = |key: &str| -> Result<String, DecisionParseError> {
        arguments
            .get(key)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| invalid(name, format!("arguments.{key} must be a string")))
    };
    Ok(match kind {
        ActionKind::GlobalQa => ActionArgs::GlobalQa { question: text("question")? },
        ActionKind::ClipQa => {
            let num = |key: &str| {
                arguments["window"][key].as_f64().ok_or_else(|| invalid(name, format!("window.{key} must be a number")))
            };
            let window = TimeWindow::new(num("start")?, num("end")?).map_err(|e| invalid(name, e.to_string()))?;
            ActionArgs::ClipQa { question: text("question")?, window }
        }
        ActionKind::Asr => ActionArgs::Asr {},
        ActionKind::GlobalCaption => ActionArgs::GlobalCaption {},
        ActionKind::AudioQa => ActionArgs::AudioQa { question: text("question")? },
        ActionKind::EventList => ActionArgs::EventList {},
        ActionKind::EventLocation => ActionArgs::EventLocation { query: text("query")? },
        ActionKind::Answer => ActionArgs::Answer { answer: text("answer")? },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::TokenCost;
    use crate::gateway::{tool_schemas, ToolCall};
    use serde_json::json;

    fn ok(content: &str, call: Option<(&str, Value)>) -> ChatResponse {
        ChatResponse {
            content: content.into(),
            tool_call: call.map(|(n, a)| ToolCall { name: n.into(), arguments: a }),
            usage: TokenCost::ZERO,
            status: ResponseStatus::Ok,
        }
    }

    #[test]
    fn structured_call() {
        let d =
            parse_decision(&ok("", Some(("event_location", json!({"query": "cat meowing"})))), tool_schemas()).unwrap();
        assert_eq!(d.args, ActionArgs::EventLocation { query: "cat meowing".into() });
    }

    #[test]
    fn fenced_clip_qa() {
        let content = "Inspect the moment.\n```json\n{\"name\": \"clip_qa\", \"arguments\": {\"question\": \"What text?\", \"window\": {\"start\": 12, \"end\": 16}}}\n```";
        let d = parse_decision(&ok(content, None), tool_schemas()).unwrap();
        assert_eq!(
            d.args,
            ActionArgs::ClipQa { question: "What text?".into(), window: TimeWindow::new(12.0, 16.0).unwrap() }
        );
        assert!(d.rationale.starts_with("Inspect"));
    }

    #[test]
    fn first_well_formed_block_wins() {
        let content = "```\nnot json\n```\n```\n{\"name\":\"asr\"}\n```\n```\n{\"name\":\"event_list\"}\n```";
        let d = parse_decision(&ok(content, None), tool_schemas()).unwrap();
        assert_eq!(d.args, ActionArgs::Asr {});
    }

    #[test]
    fn plain_answer_line() {
        let d = parse_decision(&ok("I am confident.\nANSWER: B", None), tool_schemas()).unwrap();
        assert_eq!(d.args, ActionArgs::Answer { answer: "B".into() });
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = tool_schemas();
        assert_eq!(
            parse_decision(&ok("", Some(("zoom", json!({})))), t),
            Err(DecisionParseError::UnknownTool("zoom".into()))
        );
        assert!(matches!(
            parse_decision(&ok("", Some(("event_location", json!({})))), t),
            Err(DecisionParseError::InvalidArguments { .. })
        ));
        assert!(matches!(
            parse_decision(&ok("", Some(("asr", json!({"extra": 1})))), t),
            Err(DecisionParseError::InvalidArguments { .. })
        ));
        assert!(matches!(
            parse_decision(&ok("", Some(("clip_qa", json!({"question": "q", "window": {"start": 5, "end": 2}})))), t),
            Err(DecisionParseError::InvalidArguments { .. })
        ));
        assert!(matches!(
            parse_decision(&ok("", Some(("audio_qa", json!({"question": 3})))), t),
            Err(DecisionParseError::InvalidArguments { .. })
        ));
        assert_eq!(parse_decision(&ok("hmm, let me think", None), t), Err(DecisionParseError::NoDecision));
        let failed = ChatResponse::failed(ResponseStatus::Malformed, "x");
        assert_eq!(parse_decision(&failed, t), Err(DecisionParseError::NotOk(ResponseStatus::Malformed)));
    }
}
