//! Feedback for the improved player: an AI critic, or a sample from a
//! fixed pool of human-written suggestions.

use once_cell::sync::Lazy;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use regex::Regex;
use thiserror::Error;

use super::ImprovedPlayerContext;
use crate::agents::{BackendError, ChatBackend, ChatMessage, ChatRequest, ChatResponse};
use crate::game::Role;

/// Suggestions issued per round.
pub const FEEDBACK_SIZE: usize = 3;

pub const DEFAULT_CRITIC_PROMPT: &str = "You are a negotiation coach. A {role} has been bargaining over a {product}. \
Read the {role}'s dialogs from the previous rounds and the feedback given so far, then provide three suggestions \
to help the {role} achieve a more favorable price in the next round. \
Write them as a numbered list: 1. ... 2. ... 3. ...";

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("critic called before any round was played")]
    NoRounds,
    #[error("expected {FEEDBACK_SIZE} suggestions, parsed {found}; raw critic output: {raw:?}")]
    Format { found: usize, raw: String },
    #[error("critic backend failed: {0}")]
    Backend(#[from] BackendError),
    #[error("suggestion pool has {len} entries, cannot sample {sample}")]
    PoolTooSmall { len: usize, sample: usize },
}

static ITEM_MARKER: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?:^|\s)(\d{1,2})[.)]\s+").unwrap());

/// Splits an enumerated list ("1. ... 2. ... 3. ...", inline or one per
/// line) into its items. Markers must count up from 1; text before the
/// first marker is ignored.
pub fn parse_enumerated(text: &str) -> Vec<String> {
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    let mut expected = 1u32;
    for caps in ITEM_MARKER.captures_iter(text) {
        let n: u32 = caps[1].parse().unwrap_or(0);
        if n == expected {
            let m = caps.get(0).unwrap();
            bounds.push((m.start(), m.end()));
            expected += 1;
        }
    }
    bounds
        .iter()
        .enumerate()
        .map(|(i, &(_, content_start))| {
            let end = bounds.get(i + 1).map_or(text.len(), |b| b.0);
            text[content_start..end].trim().to_string()
        })
        .collect()
}

/// Exactly three suggestions, or a format error carrying the raw text.
pub fn parse_suggestions(text: &str) -> Result<Vec<String>, FeedbackError> {
    let items = parse_enumerated(text);
    if items.len() != FEEDBACK_SIZE || items.iter().any(|s| s.is_empty()) {
        return Err(FeedbackError::Format {
            found: items.len(),
            raw: text.to_string(),
        });
    }
    Ok(items)
}

pub fn build_critic_request(
    context: &ImprovedPlayerContext,
    role: Role,
    template: &str,
    product: &str,
) -> ChatRequest {
    let system_prompt = template
        .replace("{role}", &role.label().to_ascii_lowercase())
        .replace("{product}", product);
    ChatRequest {
        system_prompt,
        messages: vec![ChatMessage::user(context.render_for_critic(role))],
        temperature: 1.0,
    }
}

/// Asks the critic for three suggestions given every past transcript and
/// all feedback so far.
pub fn critic_feedback(
    context: &ImprovedPlayerContext,
    role: Role,
    backend: &dyn ChatBackend,
    template: &str,
    product: &str,
    temperature: f64,
) -> Result<Vec<String>, FeedbackError> {
    if context.is_empty() {
        return Err(FeedbackError::NoRounds);
    }
    let mut request = build_critic_request(context, role, template, product);
    request.temperature = temperature;
    let response = backend.complete(&request)?;
    parse_suggestions(&response.text)
}

/// Uniform sample without replacement, in random order.
pub fn human_pool_feedback<R: Rng + ?Sized>(
    pool: &[String],
    sample_size: usize,
    rng: &mut R,
) -> Result<Vec<String>, FeedbackError> {
    if pool.len() < sample_size {
        return Err(FeedbackError::PoolTooSmall {
            len: pool.len(),
            sample: sample_size,
        });
    }
    let mut picked: Vec<String> = pool.choose_multiple(rng, sample_size).cloned().collect();
    picked.shuffle(rng);
    Ok(picked)
}

/// One suggestion per non-empty line; `#` starts a comment line.
pub fn parse_pool(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub const DEFAULT_HUMAN_POOL: [&str; 10] = [
    "Open by describing what makes the product special before talking about price.",
    "Concede in small steps and ask for something in return each time you move.",
    "Anchor firmly near your opening price and justify it with concrete qualities.",
    "Do not accept the first counteroffer; always test whether the other side can move further.",
    "Mention that other customers are interested to create a sense of scarcity.",
    "Ask the other side what they value most and tie the price to that.",
    "Keep your messages friendly and confident so the other side wants to close.",
    "Set a walk-away price in advance and do not go past it.",
    "Summarize the progress made so far before proposing a final number.",
    "Offer a small extra, such as free delivery, instead of lowering the price further.",
];

pub fn default_human_pool() -> Vec<String> {
    DEFAULT_HUMAN_POOL.iter().map(|s| s.to_string()).collect()
}

/// Offline critic that always answers with a well-formed three-item list.
#[derive(Debug, Default, Clone, Copy)]
pub struct ScriptedCritic;

impl ChatBackend for ScriptedCritic {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let rounds = request
            .messages
            .iter()
            .map(|m| m.text.matches(super::context::ROUND_HEADER).count())
            .sum::<usize>();
        Ok(ChatResponse::new(format!(
            "After {rounds} round(s), here is my advice:\n\
             1. Hold your price longer before conceding.\n\
             2. Point out how rare and special the item is.\n\
             3. Make smaller concessions as the talks go on."
        )))
    }
}
