//! Replays the generated turns of a stored transcript.

use std::sync::{Arc, Mutex};

use thiserror::Error;

use super::{Agent, AgentError};
use crate::game::{Role, Utterance};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("replay transcript exhausted after {0} utterances")]
    Exhausted(usize),
    #[error("replay speaker mismatch at position {position}: {requested} requested, {stored} stored")]
    SpeakerMismatch {
        position: usize,
        requested: Role,
        stored: Role,
    },
}

/// A shared position over stored utterances. Both replaying players advance
/// the same cursor.
#[derive(Debug, Clone)]
pub struct TranscriptCursor {
    utterances: Vec<Utterance>,
    position: usize,
}

impl TranscriptCursor {
    pub fn new(utterances: Vec<Utterance>) -> Self {
        TranscriptCursor {
            utterances,
            position: 0,
        }
    }

    /// Cursor over the non-opener turns of a full transcript.
    pub fn from_transcript(transcript: &[Utterance]) -> Self {
        Self::new(transcript.iter().filter(|u| !u.is_opener()).cloned().collect())
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn remaining(&self) -> usize {
        self.utterances.len() - self.position
    }
}

/// Returns the stored text for `role` and advances the cursor.
pub fn replay_respond(cursor: &mut TranscriptCursor, role: Role) -> Result<String, ReplayError> {
    let stored = cursor
        .utterances
        .get(cursor.position)
        .ok_or(ReplayError::Exhausted(cursor.utterances.len()))?;
    if stored.speaker != role {
        return Err(ReplayError::SpeakerMismatch {
            position: cursor.position,
            requested: role,
            stored: stored.speaker,
        });
    }
    cursor.position += 1;
    Ok(stored.text.clone())
}

#[derive(Debug, Clone)]
pub struct ReplayAgent {
    role: Role,
    cursor: Arc<Mutex<TranscriptCursor>>,
}

impl ReplayAgent {
    pub fn new(role: Role, cursor: Arc<Mutex<TranscriptCursor>>) -> Self {
        ReplayAgent { role, cursor }
    }

    /// A seller/buyer pair sharing one cursor over `transcript`.
    pub fn pair(transcript: &[Utterance]) -> (ReplayAgent, ReplayAgent) {
        let cursor = Arc::new(Mutex::new(TranscriptCursor::from_transcript(transcript)));
        (
            ReplayAgent::new(Role::Seller, cursor.clone()),
            ReplayAgent::new(Role::Buyer, cursor),
        )
    }
}

impl Agent for ReplayAgent {
    fn role(&self) -> Role {
        self.role
    }

    fn respond(&mut self, _history: &[Utterance]) -> Result<String, AgentError> {
        let mut cursor = self.cursor.lock().expect("replay cursor poisoned");
        Ok(replay_respond(&mut cursor, self.role)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stored() -> Vec<Utterance> {
        vec![
            Utterance::new(Role::Seller, "How about $19.00?", 0, 2),
            Utterance::new(Role::Buyer, "How about $11.50?", 0, 3),
        ]
    }

    #[test]
    fn returns_stored_text_verbatim() {
        let mut c = TranscriptCursor::new(stored());
        assert_eq!(replay_respond(&mut c, Role::Seller).unwrap(), "How about $19.00?");
        assert_eq!(c.position(), 1);
    }

    #[test]
    fn exhaustion_is_an_error() {
        let mut c = TranscriptCursor::new(stored());
        replay_respond(&mut c, Role::Seller).unwrap();
        replay_respond(&mut c, Role::Buyer).unwrap();
        assert_eq!(replay_respond(&mut c, Role::Seller), Err(ReplayError::Exhausted(2)));
    }

    #[test]
    fn speaker_mismatch_is_an_error() {
        let mut c = TranscriptCursor::new(stored());
        assert!(matches!(
            replay_respond(&mut c, Role::Buyer),
            Err(ReplayError::SpeakerMismatch {
                requested: Role::Buyer,
                stored: Role::Seller,
                ..
            })
        ));
        assert_eq!(c.position(), 0);
    }
}
