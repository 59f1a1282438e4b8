use once_cell::sync::Lazy;
use regex::Regex;

use super::{Moderator, ModeratorError};
use crate::agents::scripted::REFUSAL_SENTENCE;
use crate::game::{GameState, NoDealReason, Utterance};

static ACCEPTANCE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^I accept your offer of \$(\d+\.\d{2})\.$").unwrap());

/// Exact classifier for the scripted protocol. Only the last utterance
/// matters: the acceptance sentence yields a deal at its price, the refusal
/// sentence ends the game, anything else keeps it going.
pub fn oracle_classify(window: &[Utterance]) -> GameState {
    let Some(last) = window.last() else {
        return GameState::OnGoing;
    };
    classify_text(&last.text)
}

pub(crate) fn classify_text(text: &str) -> GameState {
    if let Some(caps) = ACCEPTANCE.captures(text) {
        if let Ok(price) = caps[1].parse() {
            return GameState::deal(price);
        }
    }
    if text == REFUSAL_SENTENCE {
        return GameState::NoDeal {
            reason: NoDealReason::ModeratorClassified,
        };
    }
    GameState::OnGoing
}

#[derive(Debug, Clone, Default)]
pub struct OracleModerator {
    window_cap: Option<usize>,
}

impl OracleModerator {
    /// Rejects windows longer than `cap`.
    pub fn with_window_cap(cap: usize) -> Self {
        OracleModerator {
            window_cap: Some(cap),
        }
    }
}

impl Moderator for OracleModerator {
    fn classify(&mut self, window: &[Utterance]) -> Result<GameState, ModeratorError> {
        if let Some(cap) = self.window_cap {
            if window.len() > cap {
                return Err(ModeratorError::WindowTooLarge {
                    got: window.len(),
                    cap,
                });
            }
        }
        Ok(oracle_classify(window))
    }
}
