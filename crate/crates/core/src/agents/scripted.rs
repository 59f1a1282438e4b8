//! Deterministic concession agents.
//!
//! A scripted player quotes a linear schedule clamped at its reserve and
//! speaks only two frozen sentences, so the rule-based moderator can read
//! every transcript exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Agent, AgentError, BackendError, ChatBackend, ChatRequest, ChatResponse, MessageTag};
use crate::game::{Role, Utterance};
use crate::price::{Price, PriceGrammar};
use crate::session::ImprovedPlayerContext;

pub const ACCEPT_PREFIX: &str = "I accept your offer of ";
pub const COUNTER_PREFIX: &str = "How about ";
/// The one protocol sentence that ends a game without a deal.
pub const REFUSAL_SENTENCE: &str = "I'm walking away, no deal.";

pub fn acceptance_sentence(price: Price, symbol: &str) -> String {
    format!("{ACCEPT_PREFIX}{}.", price.with_symbol(symbol))
}

pub fn counter_sentence(price: Price, symbol: &str) -> String {
    format!("{COUNTER_PREFIX}{}?", price.with_symbol(symbol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Seller: asks fall over time.
    Decreasing,
    /// Buyer: offers rise over time.
    Increasing,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("concession per exchange must be positive, got {0}")]
    NonPositiveConcession(Price),
    #[error("seller opening {opening} is below its reserve {reserve}")]
    SellerBelowReserve { opening: Price, reserve: Price },
    #[error("buyer opening {opening} is above its reserve {reserve}")]
    BuyerAboveReserve { opening: Price, reserve: Price },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcessionPolicy {
    pub opening: Price,
    pub reserve: Price,
    pub concession: Price,
    pub direction: Direction,
}

impl ConcessionPolicy {
    pub fn seller(opening: Price, reserve: Price, concession: Price) -> Result<Self, PolicyError> {
        Self::new(opening, reserve, concession, Direction::Decreasing)
    }

    pub fn buyer(opening: Price, reserve: Price, concession: Price) -> Result<Self, PolicyError> {
        Self::new(opening, reserve, concession, Direction::Increasing)
    }

    pub fn new(
        opening: Price,
        reserve: Price,
        concession: Price,
        direction: Direction,
    ) -> Result<Self, PolicyError> {
        let policy = ConcessionPolicy {
            opening,
            reserve,
            concession,
            direction,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.concession <= Price::ZERO {
            return Err(PolicyError::NonPositiveConcession(self.concession));
        }
        match self.direction {
            Direction::Decreasing if self.opening < self.reserve => {
                Err(PolicyError::SellerBelowReserve {
                    opening: self.opening,
                    reserve: self.reserve,
                })
            }
            Direction::Increasing if self.opening > self.reserve => {
                Err(PolicyError::BuyerAboveReserve {
                    opening: self.opening,
                    reserve: self.reserve,
                })
            }
            _ => Ok(()),
        }
    }

    /// Price quoted at exchange `t` (the opener is `t = 0`).
    pub fn quote(&self, t: u32) -> Price {
        let step = Price::from_cents(self.concession.cents().saturating_mul(t as i64));
        match self.direction {
            Direction::Decreasing => (self.opening - step).max(self.reserve),
            Direction::Increasing => (self.opening + step).min(self.reserve),
        }
    }

    /// Whether the counterparty's standing price is at least as good as
    /// what this policy would quote at exchange `t`.
    pub fn accepts(&self, standing: Price, t: u32) -> bool {
        let next = self.quote(t);
        match self.direction {
            Direction::Decreasing => standing >= next,
            Direction::Increasing => standing <= next,
        }
    }

    /// Moves the reserve `by` in this player's favour, never past the opening.
    pub fn shifted(&self, by: Price) -> ConcessionPolicy {
        let reserve = match self.direction {
            Direction::Decreasing => (self.reserve + by).min(self.opening),
            Direction::Increasing => (self.reserve - by).max(self.opening),
        };
        ConcessionPolicy { reserve, ..*self }
    }
}

/// Produces the next protocol sentence for `role` following `policy`.
///
/// The exchange index is the number of utterances `role` already has in
/// `history` (its opener included), so the first generated turn is `t = 1`.
pub fn scripted_respond(
    policy: &ConcessionPolicy,
    role: Role,
    history: &[Utterance],
    symbol: &str,
) -> Result<String, AgentError> {
    let last = history
        .last()
        .ok_or_else(|| AgentError::Protocol("empty history".into()))?;
    if Some(last.speaker) != role.counterparty() {
        return Err(AgentError::Protocol(format!(
            "{role} asked to speak after {}",
            last.speaker
        )));
    }
    let standing = standing_price(&last.text, symbol).ok_or_else(|| {
        AgentError::Protocol(format!("no price in counterparty utterance {:?}", last.text))
    })?;
    let t = history.iter().filter(|u| u.speaker == role).count() as u32;
    if policy.accepts(standing, t) {
        Ok(acceptance_sentence(standing, symbol))
    } else {
        Ok(counter_sentence(policy.quote(t), symbol))
    }
}

/// The last currency mention in `text`.
pub fn standing_price(text: &str, symbol: &str) -> Option<Price> {
    let mentions = if symbol == "$" {
        PriceGrammar::dollars().mentions(text)
    } else {
        PriceGrammar::new(symbol).mentions(text)
    };
    mentions.last().map(|m| m.amount)
}

/// A player following a [`ConcessionPolicy`]. As the improved player it can
/// move its reserve by a fixed step per feedback block received.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    role: Role,
    base: ConcessionPolicy,
    active: ConcessionPolicy,
    shift_per_feedback: Price,
    symbol: String,
}

impl ScriptedAgent {
    pub fn new(role: Role, policy: ConcessionPolicy) -> Self {
        ScriptedAgent {
            role,
            base: policy,
            active: policy,
            shift_per_feedback: Price::ZERO,
            symbol: "$".into(),
        }
    }

    pub fn with_feedback_shift(mut self, shift: Price) -> Self {
        self.shift_per_feedback = shift;
        self
    }

    pub fn with_symbol(mut self, symbol: impl Into<String>) -> Self {
        self.symbol = symbol.into();
        self
    }

    pub fn policy(&self) -> &ConcessionPolicy {
        &self.active
    }
}

impl Agent for ScriptedAgent {
    fn role(&self) -> Role {
        self.role
    }

    fn respond(&mut self, history: &[Utterance]) -> Result<String, AgentError> {
        scripted_respond(&self.active, self.role, history, &self.symbol)
    }

    fn set_context(&mut self, context: &ImprovedPlayerContext) {
        let blocks = context.feedback_count() as i64;
        self.active = self
            .base
            .shifted(Price::from_cents(self.shift_per_feedback.cents() * blocks));
    }
}

/// A [`ConcessionPolicy`] behind the chat interface, so the LLM code path
/// can run offline. Assistant messages are this player's own turns.
#[derive(Debug, Clone)]
pub struct ScriptedChatBackend {
    role: Role,
    policy: ConcessionPolicy,
    symbol: String,
}

impl ScriptedChatBackend {
    pub fn new(role: Role, policy: ConcessionPolicy) -> Self {
        ScriptedChatBackend {
            role,
            policy,
            symbol: "$".into(),
        }
    }
}

impl ChatBackend for ScriptedChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let other = self.role.counterparty().unwrap_or(Role::Buyer);
        let history: Vec<Utterance> = request
            .messages
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let speaker = if m.tag == MessageTag::Assistant { self.role } else { other };
                Utterance::new(speaker, m.text.clone(), 0, i as u32)
            })
            .collect();
        scripted_respond(&self.policy, self.role, &history, &self.symbol)
            .map(ChatResponse::new)
            .map_err(|e| BackendError::Malformed(e.to_string()))
    }
}
