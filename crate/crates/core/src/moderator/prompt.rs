//! Few-shot prompt layout for the moderator, and its inverse for stubs.
//!
//! ```text
//! Example 1:
//! Seller: How about $17?
//! Buyer: Deal, I accept.
//! State: DEAL
//!
//! Dialog to classify:
//! Seller: ...
//! State:
//! ```

use super::bank::{DemoBank, Turn};
use super::StateLabel;
use crate::agents::{ChatMessage, ChatRequest, MessageTag};
use crate::game::{Role, Utterance};

pub const QUERY_HEADER: &str = "Dialog to classify:";
pub const STATE_PREFIX: &str = "State:";

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn push_turn(out: &mut String, speaker: Role, text: &str) {
    out.push_str(speaker.label());
    out.push_str(": ");
    out.push_str(&one_line(text));
    out.push('\n');
}

pub fn render_user_message(bank: &DemoBank, window: &[Utterance]) -> String {
    let mut out = String::new();
    for (i, demo) in bank.demos.iter().enumerate() {
        out.push_str(&format!("Example {}:\n", i + 1));
        for t in &demo.window {
            push_turn(&mut out, t.speaker, &t.text);
        }
        out.push_str(&format!("{STATE_PREFIX} {}\n\n", demo.label));
    }
    out.push_str(QUERY_HEADER);
    out.push('\n');
    for u in window {
        push_turn(&mut out, u.speaker, &u.text);
    }
    out.push_str(STATE_PREFIX);
    out
}

pub fn build_request(instructions: &str, bank: &DemoBank, window: &[Utterance]) -> ChatRequest {
    ChatRequest {
        system_prompt: instructions.to_string(),
        messages: vec![ChatMessage::user(render_user_message(bank, window))],
        temperature: 0.0,
    }
}

/// Demonstrations and query window recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub demos: Vec<(Vec<Turn>, StateLabel)>,
    pub query: Vec<Turn>,
}

pub fn parse_request(request: &ChatRequest) -> Option<ParsedPrompt> {
    let user = request
        .messages
        .iter()
        .rev()
        .find(|m| m.tag == MessageTag::User)?;
    parse_user_message(&user.text)
}

pub fn parse_user_message(text: &str) -> Option<ParsedPrompt> {
    let mut demos = Vec::new();
    let mut current: Vec<Turn> = Vec::new();
    let mut in_query = false;
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        if line == QUERY_HEADER {
            in_query = true;
            current.clear();
        } else if line.starts_with("Example ") && line.ends_with(':') {
            current.clear();
        } else if let Some(rest) = line.strip_prefix(STATE_PREFIX) {
            if in_query {
                return Some(ParsedPrompt {
                    demos,
                    query: current,
                });
            }
            let label = StateLabel::parse_loose(rest)?;
            demos.push((std::mem::take(&mut current), label));
        } else {
            current.push(line.parse().ok()?);
        }
    }
    None
}
