//! Per-family request rendering and response decoding.
//!
//! `gpt` and `cohere` take structured message lists. `claude` takes a single
//! prompt where every human turn is preceded by a blank line, and `j2` takes
//! a single prompt where every dialog turn is followed by two `##` lines.
//! Each renderer has a matching parser so the framing can be checked by
//! round-tripping.

use serde_json::{json, Value};

use crate::agents::{BackendError, ChatMessage, ChatRequest, EngineFamily, MessageTag};

pub const CLAUDE_HUMAN: &str = "\n\nHuman: ";
pub const CLAUDE_ASSISTANT: &str = "\n\nAssistant: ";
pub const CLAUDE_CUE: &str = "\n\nAssistant:";

pub const J2_ROUND_END: &str = "\n##\n##\n";
pub const J2_USER: &str = "User: ";
pub const J2_ASSISTANT: &str = "Assistant: ";
pub const J2_CUE: &str = "Assistant:";

pub const MAX_COMPLETION_TOKENS: u32 = 512;

pub fn render_claude_prompt(req: &ChatRequest) -> String {
    let mut out = req.system_prompt.clone();
    for m in &req.messages {
        out.push_str(match m.tag {
            MessageTag::User => CLAUDE_HUMAN,
            MessageTag::Assistant => CLAUDE_ASSISTANT,
        });
        out.push_str(&m.text);
    }
    out.push_str(CLAUDE_CUE);
    out
}

pub fn parse_claude_prompt(prompt: &str) -> Option<(String, Vec<ChatMessage>)> {
    let body = prompt.strip_suffix(CLAUDE_CUE)?;
    let mut markers: Vec<(usize, MessageTag, usize)> = body
        .match_indices(CLAUDE_HUMAN)
        .map(|(i, m)| (i, MessageTag::User, m.len()))
        .chain(
            body.match_indices(CLAUDE_ASSISTANT)
                .map(|(i, m)| (i, MessageTag::Assistant, m.len())),
        )
        .collect();
    markers.sort_by_key(|m| m.0);
    let system = body[..markers.first().map_or(body.len(), |m| m.0)].to_string();
    let messages = markers
        .iter()
        .enumerate()
        .map(|(k, &(at, tag, len))| {
            let end = markers.get(k + 1).map_or(body.len(), |m| m.0);
            ChatMessage {
                tag,
                text: body[at + len..end].to_string(),
            }
        })
        .collect();
    Some((system, messages))
}

pub fn render_j2_prompt(req: &ChatRequest) -> String {
    let mut out = String::new();
    if !req.system_prompt.is_empty() {
        out.push_str(&req.system_prompt);
        out.push_str(J2_ROUND_END);
    }
    for m in &req.messages {
        out.push_str(match m.tag {
            MessageTag::User => J2_USER,
            MessageTag::Assistant => J2_ASSISTANT,
        });
        out.push_str(&m.text);
        out.push_str(J2_ROUND_END);
    }
    out.push_str(J2_CUE);
    out
}

pub fn parse_j2_prompt(prompt: &str) -> Option<(String, Vec<ChatMessage>)> {
    let body = prompt.strip_suffix(J2_CUE)?;
    if body.is_empty() {
        return Some((String::new(), Vec::new()));
    }
    let body = body.strip_suffix(J2_ROUND_END)?;
    let mut system = String::new();
    let mut messages = Vec::new();
    for (i, chunk) in body.split(J2_ROUND_END).enumerate() {
        if let Some(text) = chunk.strip_prefix(J2_USER) {
            messages.push(ChatMessage::user(text));
        } else if let Some(text) = chunk.strip_prefix(J2_ASSISTANT) {
            messages.push(ChatMessage::assistant(text));
        } else if i == 0 {
            system = chunk.to_string();
        } else {
            return None;
        }
    }
    Some((system, messages))
}

pub fn openai_body(model: &str, req: &ChatRequest) -> Value {
    let mut messages = Vec::new();
    if !req.system_prompt.is_empty() {
        messages.push(json!({"role": "system", "content": req.system_prompt}));
    }
    for m in &req.messages {
        let role = match m.tag {
            MessageTag::User => "user",
            MessageTag::Assistant => "assistant",
        };
        messages.push(json!({"role": role, "content": m.text}));
    }
    json!({"model": model, "temperature": req.temperature, "messages": messages})
}

pub fn parse_openai_body(body: &Value) -> Option<(String, Vec<ChatMessage>)> {
    let mut system = String::new();
    let mut messages = Vec::new();
    for m in body.get("messages")?.as_array()? {
        let content = m.get("content")?.as_str()?.to_string();
        match m.get("role")?.as_str()? {
            "system" => system = content,
            "user" => messages.push(ChatMessage::user(content)),
            "assistant" => messages.push(ChatMessage::assistant(content)),
            _ => return None,
        }
    }
    Some((system, messages))
}

/// Cohere's chat endpoint takes the latest user turn separately from the
/// history, so the request must end with a user message.
pub fn cohere_body(model: &str, req: &ChatRequest) -> Result<Value, BackendError> {
    let (last, history) = req
        .messages
        .split_last()
        .ok_or_else(|| BackendError::Precondition("empty message list".into()))?;
    if last.tag != MessageTag::User {
        return Err(BackendError::Precondition(
            "cohere requests must end with a user message".into(),
        ));
    }
    let chat_history: Vec<Value> = history
        .iter()
        .map(|m| {
            let role = match m.tag {
                MessageTag::User => "USER",
                MessageTag::Assistant => "CHATBOT",
            };
            json!({"role": role, "message": m.text})
        })
        .collect();
    Ok(json!({
        "model": model,
        "preamble": req.system_prompt,
        "chat_history": chat_history,
        "message": last.text,
        "temperature": req.temperature,
    }))
}

pub fn parse_cohere_body(body: &Value) -> Option<(String, Vec<ChatMessage>)> {
    let system = body.get("preamble")?.as_str()?.to_string();
    let mut messages = Vec::new();
    for m in body.get("chat_history")?.as_array()? {
        let text = m.get("message")?.as_str()?.to_string();
        match m.get("role")?.as_str()? {
            "USER" => messages.push(ChatMessage::user(text)),
            "CHATBOT" => messages.push(ChatMessage::assistant(text)),
            _ => return None,
        }
    }
    messages.push(ChatMessage::user(body.get("message")?.as_str()?));
    Some((system, messages))
}

/// Endpoint path, JSON body and auth headers for one call.
pub struct WireRequest {
    pub path: String,
    pub body: Value,
    pub headers: Vec<(String, String)>,
}

pub fn wire_request(
    family: EngineFamily,
    model: &str,
    api_key: &str,
    req: &ChatRequest,
) -> Result<WireRequest, BackendError> {
    let bearer = || vec![("Authorization".to_string(), format!("Bearer {api_key}"))];
    let wire = match family {
        EngineFamily::Gpt => WireRequest {
            path: "/v1/chat/completions".into(),
            body: openai_body(model, req),
            headers: bearer(),
        },
        EngineFamily::Claude => WireRequest {
            path: "/v1/complete".into(),
            body: json!({
                "model": model,
                "prompt": render_claude_prompt(req),
                "max_tokens_to_sample": MAX_COMPLETION_TOKENS,
                "temperature": req.temperature,
            }),
            headers: vec![
                ("x-api-key".to_string(), api_key.to_string()),
                ("anthropic-version".to_string(), "2023-06-01".to_string()),
            ],
        },
        EngineFamily::Cohere => WireRequest {
            path: "/v1/chat".into(),
            body: cohere_body(model, req)?,
            headers: bearer(),
        },
        EngineFamily::J2 => WireRequest {
            path: format!("/studio/v1/{model}/complete"),
            body: json!({
                "prompt": render_j2_prompt(req),
                "temperature": req.temperature,
                "maxTokens": MAX_COMPLETION_TOKENS,
                "stopSequences": ["##"],
            }),
            headers: bearer(),
        },
        other => {
            return Err(BackendError::Config(format!(
                "{} is not a remote engine family",
                other.name()
            )))
        }
    };
    Ok(wire)
}

/// Pulls the completion text out of a provider response body.
pub fn response_text(family: EngineFamily, body: &Value) -> Result<String, BackendError> {
    let text = match family {
        EngineFamily::Gpt => body
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str),
        EngineFamily::Claude => body.get("completion").and_then(Value::as_str),
        EngineFamily::Cohere => body.get("text").and_then(Value::as_str),
        EngineFamily::J2 => body
            .pointer("/completions/0/data/text")
            .and_then(Value::as_str),
        _ => None,
    };
    text.map(str::to_string).ok_or_else(|| {
        BackendError::Malformed(format!("no completion text for {} in {body}", family.name()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_message_request() -> ChatRequest {
        ChatRequest {
            system_prompt: "You are the seller.".into(),
            messages: vec![
                ChatMessage::user("Would you consider selling it for $10?"),
                ChatMessage::assistant("How about $19.00?"),
            ],
            temperature: 1.0,
        }
    }

    #[test]
    fn claude_golden() {
        let prompt = render_claude_prompt(&two_message_request());
        assert_eq!(
            prompt,
            "You are the seller.\n\nHuman: Would you consider selling it for $10?\n\nAssistant: How about $19.00?\n\nAssistant:"
        );
        for (i, _) in prompt.match_indices("Human:") {
            assert_eq!(&prompt[i - 2..i], "\n\n");
        }
    }

    #[test]
    fn j2_golden() {
        let req = ChatRequest {
            system_prompt: String::new(),
            messages: vec![ChatMessage::user("Would you consider selling it for $10?")],
            temperature: 0.7,
        };
        assert_eq!(
            render_j2_prompt(&req),
            "User: Would you consider selling it for $10?\n##\n##\nAssistant:"
        );
    }

    #[test]
    fn claude_and_j2_parse_back() {
        let req = two_message_request();
        let (s, m) = parse_claude_prompt(&render_claude_prompt(&req)).unwrap();
        assert_eq!((s.as_str(), m), (req.system_prompt.as_str(), req.messages.clone()));
        let (s, m) = parse_j2_prompt(&render_j2_prompt(&req)).unwrap();
        assert_eq!((s.as_str(), m), (req.system_prompt.as_str(), req.messages.clone()));
    }

    #[test]
    fn cohere_requires_trailing_user_turn() {
        assert!(cohere_body("command", &two_message_request()).is_err());
        let mut req = two_message_request();
        req.messages.push(ChatMessage::user("Fine, $15?"));
        let body = cohere_body("command", &req).unwrap();
        assert_eq!(body["message"], "Fine, $15?");
        assert_eq!(body["chat_history"][1]["role"], "CHATBOT");
    }

    #[test]
    fn response_decoding() {
        let gpt = json!({"choices": [{"message": {"role": "assistant", "content": "hi"}}]});
        assert_eq!(response_text(EngineFamily::Gpt, &gpt).unwrap(), "hi");
        let j2 = json!({"completions": [{"data": {"text": "yo"}}]});
        assert_eq!(response_text(EngineFamily::J2, &j2).unwrap(), "yo");
        assert!(response_text(EngineFamily::Claude, &gpt).is_err());
    }
}
