//! Negotiation state classification.
//!
//! Two classifiers share the [`Moderator`] trait: the exact rule-based
//! [`OracleModerator`] for protocol transcripts, and [`FewShotModerator`],
//! which prompts a chat backend with demonstrations from a [`DemoBank`].

pub mod bank;
pub mod extract;
pub mod oracle;
pub mod prompt;
pub mod stub;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{BackendError, ChatBackend};
use crate::game::{GameState, NoDealReason, Utterance};

pub use bank::{Demo, DemoBank, LabeledCorpus, Turn};
pub use extract::{extract_price, PriceMention};
pub use oracle::{oracle_classify, OracleModerator};
pub use stub::{NearestDemoBackend, OracleBackend};

pub trait Moderator: Send {
    fn classify(&mut self, window: &[Utterance]) -> Result<GameState, ModeratorError>;
}

impl<M: Moderator + ?Sized> Moderator for Box<M> {
    fn classify(&mut self, window: &[Utterance]) -> Result<GameState, ModeratorError> {
        (**self).classify(window)
    }
}

#[derive(Debug, Error)]
pub enum ModeratorError {
    #[error("moderator backend failed: {0}")]
    Backend(#[from] BackendError),
    #[error("window of {got} utterances exceeds the cap of {cap}")]
    WindowTooLarge { got: usize, cap: usize },
    #[error("cannot classify an empty window")]
    EmptyWindow,
}

/// The three states as labels, without a price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateLabel {
    #[serde(rename = "ON-GOING")]
    OnGoing,
    #[serde(rename = "DEAL")]
    Deal,
    #[serde(rename = "NO DEAL")]
    NoDeal,
}

impl StateLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::OnGoing => "ON-GOING",
            StateLabel::Deal => "DEAL",
            StateLabel::NoDeal => "NO DEAL",
        }
    }

    pub fn of(state: &GameState) -> StateLabel {
        match state {
            GameState::OnGoing => StateLabel::OnGoing,
            GameState::Deal { .. } => StateLabel::Deal,
            GameState::NoDeal { .. } => StateLabel::NoDeal,
        }
    }

    /// Reads a label from model output. A leading label wins; otherwise
    /// `NO DEAL` beats `ON-GOING`, which beats a bare `DEAL`.
    pub fn parse_loose(text: &str) -> Option<StateLabel> {
        let upper = text.trim().to_ascii_uppercase();
        let upper = upper.strip_prefix("STATE:").map(str::trim).unwrap_or(&upper);
        const NO_DEAL: [&str; 3] = ["NO DEAL", "NO-DEAL", "NODEAL"];
        const ON_GOING: [&str; 3] = ["ON-GOING", "ONGOING", "ON GOING"];
        let starts = |alts: &[&str]| alts.iter().any(|a| upper.starts_with(a));
        let has = |alts: &[&str]| alts.iter().any(|a| upper.contains(a));
        if starts(&NO_DEAL) {
            Some(StateLabel::NoDeal)
        } else if starts(&ON_GOING) {
            Some(StateLabel::OnGoing)
        } else if upper.starts_with("DEAL") {
            Some(StateLabel::Deal)
        } else if has(&NO_DEAL) {
            Some(StateLabel::NoDeal)
        } else if has(&ON_GOING) {
            Some(StateLabel::OnGoing)
        } else if upper.contains("DEAL") {
            Some(StateLabel::Deal)
        } else {
            None
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DEFAULT_MODERATOR_INSTRUCTIONS: &str = "You are the moderator of a bargaining game between a seller and a buyer. \
Read the most recent turns of their dialog and decide the state of the negotiation. \
Answer DEAL if both sides have agreed on a price, NO DEAL if either side has walked away or the talks have broken down, \
and ON-GOING otherwise. Answer with exactly one of: ON-GOING, DEAL, NO DEAL.";

/// Prompts `backend` with the bank's demonstrations and the window, and
/// turns the answer into a state. Unreadable answers count as `OnGoing`.
pub fn classify_window(
    window: &[Utterance],
    bank: &DemoBank,
    backend: &dyn ChatBackend,
    instructions: &str,
) -> Result<GameState, ModeratorError> {
    if window.is_empty() {
        return Err(ModeratorError::EmptyWindow);
    }
    let request = prompt::build_request(instructions, bank, window);
    let response = backend.complete(&request)?;
    let label = match StateLabel::parse_loose(&response.text) {
        Some(label) => label,
        None => {
            log::warn!(
                "unparseable moderator answer {:?}; treating as ON-GOING",
                response.text
            );
            StateLabel::OnGoing
        }
    };
    Ok(match label {
        StateLabel::OnGoing => GameState::OnGoing,
        StateLabel::Deal => GameState::Deal {
            price: extract_price(window).map(|m| m.amount),
        },
        StateLabel::NoDeal => GameState::NoDeal {
            reason: NoDealReason::ModeratorClassified,
        },
    })
}

pub struct FewShotModerator {
    bank: Arc<DemoBank>,
    backend: Arc<dyn ChatBackend>,
    instructions: String,
    window_cap: usize,
}

impl FewShotModerator {
    pub fn new(bank: Arc<DemoBank>, backend: Arc<dyn ChatBackend>, window_cap: usize) -> Self {
        FewShotModerator {
            bank,
            backend,
            instructions: DEFAULT_MODERATOR_INSTRUCTIONS.to_string(),
            window_cap,
        }
    }

    pub fn with_instructions(mut self, instructions: impl Into<String>) -> Self {
        self.instructions = instructions.into();
        self
    }
}

impl Moderator for FewShotModerator {
    fn classify(&mut self, window: &[Utterance]) -> Result<GameState, ModeratorError> {
        if window.len() > self.window_cap {
            return Err(ModeratorError::WindowTooLarge {
                got: window.len(),
                cap: self.window_cap,
            });
        }
        classify_window(window, &self.bank, self.backend.as_ref(), &self.instructions)
    }
}

/// Accuracy of a classifier over a labeled corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    /// Corpus items the classifier got wrong, with their true labels.
    pub misclassified: Vec<Demo>,
    /// Predicted label for each corpus item, in order.
    pub predictions: Vec<StateLabel>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

pub fn evaluate(
    corpus: &LabeledCorpus,
    bank: &DemoBank,
    backend: &dyn ChatBackend,
    instructions: &str,
) -> Result<EvalReport, ModeratorError> {
    let mut report = EvalReport {
        total: corpus.items.len(),
        correct: 0,
        misclassified: Vec::new(),
        predictions: Vec::with_capacity(corpus.items.len()),
    };
    for item in &corpus.items {
        let state = classify_window(&item.utterances(), bank, backend, instructions)?;
        let predicted = StateLabel::of(&state);
        if predicted == item.label {
            report.correct += 1;
        } else {
            report.misclassified.push(item.clone());
        }
        report.predictions.push(predicted);
    }
    Ok(report)
}
