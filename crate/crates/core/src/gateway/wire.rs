use serde::{Deserialize, Serialize};

use super::{ChatMessage, ChatRequest, ChatResponse, ResponseStatus, Role, ToolCall, ToolSchema};
use crate::cost::TokenCost;

/// Request/response dialect spoken by an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    #[default]
    Generic,
    Openai,
}

#[derive(Serialize)]
struct GenericRequest<'a> {
    model: &'a str,
    messages: Vec<MessageRef<'a>>,
    tools: &'a [ToolSchema],
    reasoning: Reasoning,
}

#[derive(Serialize)]
struct MessageRef<'a> {
    role: Role,
    content: &'a str,
}

#[derive(Serialize)]
struct Reasoning {
    enabled: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenericResponse {
    #[serde(default)]
    content: String,
    #[serde(default)]
    tool_call: Option<ToolCall>,
    usage: GenericUsage,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenericUsage {
    input_tokens: u64,
    output_tokens: u64,
}

#[derive(Serialize)]
struct OpenaiRequest<'a> {
    model: &'a str,
    messages: Vec<MessageRef<'a>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    tools: Vec<OpenaiTool<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reasoning_effort: Option<&'static str>,
}

#[derive(Serialize)]
struct OpenaiTool<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    function: &'a ToolSchema,
}

#[derive(Deserialize)]
struct OpenaiResponse {
    choices: Vec<OpenaiChoice>,
    usage: OpenaiUsage,
}

#[derive(Deserialize)]
struct OpenaiChoice {
    message: OpenaiMessage,
}

#[derive(Deserialize)]
struct OpenaiMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    tool_calls: Vec<OpenaiToolCall>,
}

#[derive(Deserialize)]
struct OpenaiToolCall {
    function: OpenaiFunction,
}

#[derive(Deserialize)]
struct OpenaiFunction {
    name: String,
    arguments: String,
}

#[derive(Deserialize)]
struct OpenaiUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

fn message_refs(req: &ChatRequest) -> Vec<MessageRef<'_>> {
    let system =
        (!req.system_prompt.is_empty()).then(|| MessageRef { role: Role::System, content: &req.system_prompt });
    system
        .into_iter()
        .chain(req.messages.iter().map(|m: &ChatMessage| MessageRef { role: m.role, content: &m.content }))
        .collect()
}

impl Provider {
    pub fn encode(self, req: &ChatRequest) -> Vec<u8> {
        let body = match self {
            Provider::Generic => serde_json::to_vec(&GenericRequest {
                model: &req.model_name,
                messages: message_refs(req),
                tools: &req.tool_schemas,
                reasoning: Reasoning { enabled: req.reasoning_enabled },
            }),
            Provider::Openai => serde_json::to_vec(&OpenaiRequest {
                model: &req.model_name,
                messages: message_refs(req),
                tools: req.tool_schemas.iter().map(|f| OpenaiTool { kind: "function", function: f }).collect(),
                reasoning_effort: req.reasoning_enabled.then_some("medium"),
            }),
        };
        body.expect("request bodies always serialize")
    }

    /// Decodes a 2xx body. Anything unreadable becomes a `MALFORMED` response.
    pub fn decode(self, body: &[u8]) -> ChatResponse {
        let decoded = match self {
            Provider::Generic => serde_json::from_slice::<GenericResponse>(body)
                .map_err(|e| e.to_string())
                .map(|r| (r.content, r.tool_call, r.usage.input_tokens + r.usage.output_tokens)),
            Provider::Openai => {
                serde_json::from_slice::<OpenaiResponse>(body).map_err(|e| e.to_string()).and_then(decode_openai)
            }
        };
        match decoded {
            Ok((content, tool_call, tokens)) => {
                ChatResponse { content, tool_call, usage: TokenCost::new(0, 0, tokens), status: ResponseStatus::Ok }
            }
            Err(e) => ChatResponse::failed(ResponseStatus::Malformed, format!("unreadable response body: {e}")),
        }
    }
}

fn decode_openai(r: OpenaiResponse) -> Result<(String, Option<ToolCall>, u64), String> {
    let choice = r.choices.into_iter().next().ok_or("response has no choices")?;
    let tool_call = match choice.message.tool_calls.into_iter().next() {
        Some(c) => Some(ToolCall {
            arguments: serde_json::from_str(&c.function.arguments)
                .map_err(|e| format!("tool call arguments are not JSON: {e}"))?,
            name: c.function.name,
        }),
        None => None,
    };
    Ok((choice.message.content.unwrap_or_default(), tool_call, r.usage.prompt_tokens + r.usage.completion_tokens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::{json, Value};

    fn req() -> ChatRequest {
        ChatRequest {
            model_name: "m1".into(),
            system_prompt: "sys".into(),
            messages: vec![ChatMessage::user("hello")],
            tool_schemas: vec![ToolSchema {
                name: "asr".into(),
                description: "d".into(),
                parameters: json!({"type": "object"}),
            }],
            reasoning_enabled: true,
            timeout_ms: 100,
            max_retries: 0,
        }
    }

    #[test]
    fn generic_body_shape() {
        let body: Value = serde_json::from_slice(&Provider::Generic.encode(&req())).unwrap();
        assert_eq!(
            body,
            json!({
                "model": "m1",
                "messages": [{"role": "system", "content": "sys"}, {"role": "user", "content": "hello"}],
                "tools": [{"name": "asr", "description": "d", "parameters": {"type": "object"}}],
                "reasoning": {"enabled": true}
            })
        );
    }

    #[test]
    fn openai_body_shape() {
        let mut r = req();
        r.reasoning_enabled = false;
        let body: Value = serde_json::from_slice(&Provider::Openai.encode(&r)).unwrap();
        assert_eq!(body["tools"][0]["type"], "function");
        assert_eq!(body["tools"][0]["function"]["name"], "asr");
        assert!(body.get("reasoning_effort").is_none());
    }

    #[test]
    fn generic_decode() {
        let r = Provider::Generic.decode(
            br#"{"content":"ok","tool_call":{"name":"asr","arguments":{}},"usage":{"input_tokens":3,"output_tokens":4}}"#,
        );
        assert_eq!(r.status, ResponseStatus::Ok);
        assert_eq!(r.usage.text, 7);
        assert_eq!(r.tool_call.unwrap().name, "asr");
    }

    #[test]
    fn openai_decode() {
        let r = Provider::Openai.decode(
            br#"{"choices":[{"message":{"content":null,"tool_calls":[{"function":{"name":"event_location","arguments":"{\"query\":\"cat\"}"}}]}}],"usage":{"prompt_tokens":1,"completion_tokens":2}}"#,
        );
        assert_eq!(r.status, ResponseStatus::Ok);
        let call = r.tool_call.unwrap();
        assert_eq!(call.arguments, json!({"query": "cat"}));
        assert_eq!(r.content, "");
    }

    #[test]
    fn garbage_is_malformed() {
        for p in [Provider::Generic, Provider::Openai] {
            let r = p.decode(b"<html>oops</html>");
            assert_eq!(r.status, ResponseStatus::Malformed);
            assert!(r.tool_call.is_none());
        }
        let r = Provider::Openai.decode(br#"{"choices":[],"usage":{"prompt_tokens":1,"completion_tokens":2}}"#);
        assert_eq!(r.status, ResponseStatus::Malformed);
    }
}
