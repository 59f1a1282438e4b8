//! Offline chat backends that answer moderator prompts.

use std::collections::HashSet;

use super::bank::{window_key, Turn};
use super::oracle::classify_text;
use super::prompt::parse_request;
use super::StateLabel;
use crate::agents::{BackendError, ChatBackend, ChatRequest, ChatResponse};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "at", "be", "for", "i", "i'll", "i'm", "is", "it", "it's", "me", "my", "of", "that",
    "the", "then", "this", "to", "we", "you", "your",
];

/// Lowercased content words; every number, decimals included, becomes `#`.
fn tokens(text: &str) -> HashSet<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '.'))
        .map(|t| t.trim_matches('.'))
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(&t.to_lowercase().as_str()))
        .map(|t| {
            if t.chars().all(|c| c.is_ascii_digit() || c == '.') {
                "#".to_string()
            } else {
                t.to_lowercase()
            }
        })
        .collect()
}

fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    inter / union
}

/// Similarity between two windows. Identical windows score highest; the
/// final turn is weighted twice as much as the whole window.
pub fn window_similarity(query: &[Turn], demo: &[Turn]) -> f64 {
    if window_key(query) == window_key(demo) {
        return f64::INFINITY;
    }
    let last = |w: &[Turn]| w.last().map(|t| tokens(&t.text)).unwrap_or_default();
    let all = |w: &[Turn]| {
        w.iter()
            .flat_map(|t| tokens(&t.text))
            .collect::<HashSet<_>>()
    };
    2.0 * jaccard(&last(query), &last(demo)) + jaccard(&all(query), &all(demo))
}

/// Answers with the label of the demonstration nearest to the query window.
/// Earlier demonstrations win ties.
#[derive(Debug, Default, Clone, Copy)]
pub struct NearestDemoBackend;

impl ChatBackend for NearestDemoBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let parsed = parse_request(request)
            .ok_or_else(|| BackendError::Malformed("not a moderator prompt".into()))?;
        let mut best: Option<(f64, StateLabel)> = None;
        for (turns, label) in &parsed.demos {
            let score = window_similarity(&parsed.query, turns);
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, *label));
            }
        }
        let label = best.map_or(StateLabel::OnGoing, |(_, l)| l);
        Ok(ChatResponse::new(label.as_str()))
    }
}

/// Applies the protocol rules to the query window of a moderator prompt.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleBackend;

impl ChatBackend for OracleBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let parsed = parse_request(request)
            .ok_or_else(|| BackendError::Malformed("not a moderator prompt".into()))?;
        let state = parsed
            .query
            .last()
            .map(|t| classify_text(&t.text))
            .unwrap_or(crate::game::GameState::OnGoing);
        Ok(ChatResponse::new(StateLabel::of(&state).as_str()))
    }
}
