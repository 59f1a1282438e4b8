//! Chat agents: the player abstraction and its backends.
//!
//! Three kinds of backend exist:
//! - [`scripted`]: deterministic concession agents speaking a frozen protocol,
//! - [`replay`]: a cursor over a stored transcript,
//! - [`remote`]: provider chat APIs with per-family prompt formatting.
//!
//! LLM-backed players are built by wrapping a [`ChatBackend`] in a
//! [`player::ChatPlayer`].

pub mod player;
pub mod remote;
pub mod replay;
pub mod scripted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Role, Utterance};
use crate::session::ImprovedPlayerContext;

pub use player::ChatPlayer;
pub use replay::{ReplayAgent, ReplayError, TranscriptCursor};
pub use scripted::{ConcessionPolicy, Direction, ScriptedAgent, ScriptedChatBackend};

/// A negotiating player. Receives the whole conversation so far and returns
/// its next utterance.
pub trait Agent: Send {
    fn role(&self) -> Role;

    fn respond(&mut self, history: &[Utterance]) -> Result<String, AgentError>;

    /// Prior rounds and feedback, handed to the improved player before each
    /// game. Rivals never receive this.
    fn set_context(&mut self, _context: &ImprovedPlayerContext) {}
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn role(&self) -> Role {
        (**self).role()
    }

    fn respond(&mut self, history: &[Utterance]) -> Result<String, AgentError> {
        (**self).respond(history)
    }

    fn set_context(&mut self, context: &ImprovedPlayerContext) {
        (**self).set_context(context)
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineFamily {
    Gpt,
    Claude,
    Cohere,
    J2,
    Scripted,
    Replay,
}

impl EngineFamily {
    /// Default sampling temperature for the family.
    pub fn default_temperature(self) -> f64 {
        match self {
            EngineFamily::Gpt | EngineFamily::Claude => 1.0,
            EngineFamily::Cohere => 0.75,
            EngineFamily::J2 => 0.7,
            EngineFamily::Scripted | EngineFamily::Replay => 0.0,
        }
    }

    pub fn is_remote(self) -> bool {
        !matches!(self, EngineFamily::Scripted | EngineFamily::Replay)
    }

    /// Environment variable holding the provider API key.
    pub fn api_key_var(self) -> Option<&'static str> {
        match self {
            EngineFamily::Gpt => Some("OPENAI_API_KEY"),
            EngineFamily::Claude => Some("ANTHROPIC_API_KEY"),
            EngineFamily::Cohere => Some("COHERE_API_KEY"),
            EngineFamily::J2 => Some("AI21_API_KEY"),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EngineFamily::Gpt => "gpt",
            EngineFamily::Claude => "claude",
            EngineFamily::Cohere => "cohere",
            EngineFamily::J2 => "j2",
            EngineFamily::Scripted => "scripted",
            EngineFamily::Replay => "replay",
        }
    }
}

/// Engine identity: a family plus the provider's model name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EngineId {
    pub family: EngineFamily,
    pub model_name: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unrecognized engine {0:?}")]
pub struct UnknownEngine(pub String);

impl EngineId {
    pub fn new(family: EngineFamily, model_name: impl Into<String>) -> Self {
        EngineId {
            family,
            model_name: model_name.into(),
        }
    }

    pub fn scripted() -> Self {
        EngineId::new(EngineFamily::Scripted, "scripted")
    }

    pub fn gpt35() -> Self {
        EngineId::new(EngineFamily::Gpt, "gpt-3.5-turbo")
    }
}

impl FromStr for EngineId {
    type Err = UnknownEngine;

    /// Infers the family from the model name: `gpt-4`, `claude-v1.3`,
    /// `cohere-command`/`command`, `j2-jumbo-instruct`, `scripted`, `replay`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = s.trim();
        let lower = name.to_ascii_lowercase();
        let family = if lower == "scripted" {
            EngineFamily::Scripted
        } else if lower == "replay" {
            EngineFamily::Replay
        } else if lower.starts_with("gpt") {
            EngineFamily::Gpt
        } else if lower.starts_with("claude") {
            EngineFamily::Claude
        } else if lower.starts_with("cohere") || lower.starts_with("command") {
            EngineFamily::Cohere
        } else if lower.starts_with("j2") || lower.starts_with("jurassic") {
            EngineFamily::J2
        } else {
            return Err(UnknownEngine(name.to_string()));
        };
        let model = match family {
            EngineFamily::Cohere => name.strip_prefix("cohere-").unwrap_or(name),
            _ => name,
        };
        Ok(EngineId::new(family, model))
    }
}

impl fmt::Display for EngineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            EngineFamily::Cohere if !self.model_name.starts_with("cohere") => {
                write!(f, "cohere-{}", self.model_name)
            }
            _ => f.write_str(&self.model_name),
        }
    }
}

impl Serialize for EngineId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EngineId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How a player is instantiated on an engine.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub role: Role,
    pub engine: EngineId,
    pub persona_prompt: String,
    pub temperature: f64,
}

impl AgentSpec {
    /// Uses the family's default temperature.
    pub fn new(role: Role, engine: EngineId, persona_prompt: impl Into<String>) -> Self {
        let temperature = engine.family.default_temperature();
        AgentSpec {
            role,
            engine,
            persona_prompt: persona_prompt.into(),
            temperature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageTag {
    /// The counterparty, or whoever issues the instruction.
    User,
    /// The agent being prompted.
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub tag: MessageTag,
    pub text: String,
}

impl ChatMessage {
    pub fn user(text: impl Into<String>) -> Self {
        ChatMessage {
            tag: MessageTag::User,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        ChatMessage {
            tag: MessageTag::Assistant,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    /// Character count of `text`.
    pub char_count: usize,
}

impl ChatResponse {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let char_count = text.chars().count();
        ChatResponse { text, char_count }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("request rejected before sending: {0}")]
    Precondition(String),
    #[error("{provider} request failed after {attempts} attempts: {detail}")]
    Exhausted {
        provider: &'static str,
        attempts: u32,
        detail: String,
    },
    #[error("{provider} returned status {status}: {body}")]
    Status {
        provider: &'static str,
        status: u16,
        body: String,
    },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

/// Anything that completes a chat request: remote providers, stubs, oracles.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_temperatures() {
        let t = |s: &str| AgentSpec::new(Role::Seller, s.parse().unwrap(), "").temperature;
        assert_eq!(t("gpt-4"), 1.0);
        assert_eq!(t("gpt-3.5-turbo"), 1.0);
        assert_eq!(t("claude-v1.3"), 1.0);
        assert_eq!(t("cohere-command"), 0.75);
        assert_eq!(t("j2-jumbo-instruct"), 0.7);
    }

    #[test]
    fn engine_parsing() {
        let e: EngineId = "cohere-command".parse().unwrap();
        assert_eq!(e.family, EngineFamily::Cohere);
        assert_eq!(e.model_name, "command");
        assert_eq!(e.to_string(), "cohere-command");
        assert_eq!("scripted".parse::<EngineId>().unwrap().family, EngineFamily::Scripted);
        assert_eq!("replay".parse::<EngineId>().unwrap().family, EngineFamily::Replay);
        assert_eq!("claude-instant-v1.0".parse::<EngineId>().unwrap().family, EngineFamily::Claude);
        assert!("palm-2".parse::<EngineId>().is_err());
    }

    #[test]
    fn credentials_only_for_remote() {
        assert!(EngineFamily::Scripted.api_key_var().is_none());
        assert!(!EngineFamily::Replay.is_remote());
        assert_eq!(EngineFamily::Claude.api_key_var(), Some("ANTHROPIC_API_KEY"));
    }
}
