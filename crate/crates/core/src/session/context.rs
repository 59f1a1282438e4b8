use serde::{Deserialize, Serialize};

use crate::game::{GameState, Role, RoundRecord, Utterance};

/// One completed round as the improved player remembers it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub round_index: u32,
    pub transcript: Vec<Utterance>,
    pub outcome: GameState,
    pub feedback: Option<Vec<String>>,
}

/// Everything the improved player carries between rounds: verbatim
/// transcripts of all earlier rounds and the feedback issued after each.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ImprovedPlayerContext {
    pub blocks: Vec<ContextBlock>,
}

pub const ROUND_HEADER: &str = "Previous round";
pub const FEEDBACK_HEADER: &str = "Feedback received after round";

impl ImprovedPlayerContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Rounds for which feedback was recorded.
    pub fn feedback_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.feedback.is_some()).count()
    }

    pub fn push_round(&mut self, record: &RoundRecord) {
        self.blocks.push(ContextBlock {
            round_index: record.round_index,
            transcript: record.transcript.clone(),
            outcome: record.terminal_state,
            feedback: record.feedback.clone(),
        });
    }

    /// Attaches feedback to the most recent round.
    pub fn attach_feedback(&mut self, feedback: Vec<String>) {
        if let Some(last) = self.blocks.last_mut() {
            last.feedback = Some(feedback);
        }
    }

    /// Rebuilds the context from already-played rounds, oldest first.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a RoundRecord>) -> Self {
        let mut ctx = Self::new();
        for r in records {
            ctx.push_round(r);
        }
        ctx
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            let n = block.round_index + 1;
            out.push_str(&format!("{ROUND_HEADER} {n}:\n"));
            for u in &block.transcript {
                out.push_str(&format!("{}: {}\n", u.speaker.label(), u.text));
            }
            out.push_str(&format!("Outcome: {}\n", block.outcome));
            if let Some(fb) = &block.feedback {
                out.push_str(&format!("{FEEDBACK_HEADER} {n}:\n"));
                for (i, s) in fb.iter().enumerate() {
                    out.push_str(&format!("{}. {}\n", i + 1, s));
                }
            }
            out.push('\n');
        }
        out.trim_end().to_string()
    }

    pub fn render_for_player(&self) -> String {
        if self.is_empty() {
            return String::new();
        }
        format!(
            "Here is how your previous negotiations went and the advice you received. \
             Use it to get a better price this time.\n\n{}",
            self.render()
        )
    }

    pub fn render_for_critic(&self, role: Role) -> String {
        format!(
            "Dialog history of the {} from all rounds so far, with the feedback already given:\n\n{}",
            role.label().to_ascii_lowercase(),
            self.render()
        )
    }
}
