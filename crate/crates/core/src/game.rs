//! The bargaining game: roles, utterances, terminal states, and the
//! sequential turn loop for a single game.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError};
use crate::moderator::{Moderator, ModeratorError};
use crate::price::{CorridorError, Price, PriceCorridor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Seller,
    Buyer,
    Critic,
    Moderator,
}

impl Role {
    /// The other player, for the two roles that take turns.
    pub fn counterparty(self) -> Option<Role> {
        match self {
            Role::Seller => Some(Role::Buyer),
            Role::Buyer => Some(Role::Seller),
            _ => None,
        }
    }

    pub fn is_player(self) -> bool {
        matches!(self, Role::Seller | Role::Buyer)
    }

    pub fn label(self) -> &'static str {
        match self {
            Role::Seller => "Seller",
            Role::Buyer => "Buyer",
            Role::Critic => "Critic",
            Role::Moderator => "Moderator",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s.trim().to_ascii_lowercase().as_str() {
            "seller" => Some(Role::Seller),
            "buyer" => Some(Role::Buyer),
            "critic" => Some(Role::Critic),
            "moderator" => Some(Role::Moderator),
            _ => None,
        }
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::parse(s).ok_or_else(|| format!("unknown role {s:?}"))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One speaker turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Role,
    pub text: String,
    pub round_index: u32,
    pub turn_index: u32,
    pub char_length: usize,
}

impl Utterance {
    pub fn new(speaker: Role, text: impl Into<String>, round_index: u32, turn_index: u32) -> Self {
        let text = text.into();
        let char_length = text.chars().count();
        Utterance {
            speaker,
            text,
            round_index,
            turn_index,
            char_length,
        }
    }

    /// Index 0 and 1 are the injected opening moves.
    pub fn is_opener(&self) -> bool {
        self.turn_index < 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoDealReason {
    ModeratorClassified,
    TurnCapReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum GameState {
    OnGoing,
    /// `price` is absent when no amount could be read off the dialog.
    Deal { price: Option<Price> },
    NoDeal { reason: NoDealReason },
}

impl GameState {
    pub fn deal(price: Price) -> Self {
        GameState::Deal { price: Some(price) }
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, GameState::OnGoing)
    }

    pub fn deal_price(&self) -> Option<Price> {
        match self {
            GameState::Deal { price } => *price,
            _ => None,
        }
    }

    pub fn is_deal(&self) -> bool {
        matches!(self, GameState::Deal { .. })
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameState::OnGoing => f.write_str("ON-GOING"),
            GameState::Deal { price: Some(p) } => write!(f, "DEAL at {p}"),
            GameState::Deal { price: None } => f.write_str("DEAL (price unresolved)"),
            GameState::NoDeal {
                reason: NoDealReason::ModeratorClassified,
            } => f.write_str("NO DEAL"),
            GameState::NoDeal {
                reason: NoDealReason::TurnCapReached,
            } => f.write_str("NO DEAL (turn cap)"),
        }
    }
}

pub const DEFAULT_SELLER_OPENING: &str = "This is a good {product} and its price is {ceiling}.";
pub const DEFAULT_BUYER_OPENING: &str = "Would you consider selling it for {floor}?";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub corridor: PriceCorridor,
    pub product_name: String,
    /// Template with `{product}` and `{ceiling}` placeholders.
    pub seller_opening: String,
    /// Template with `{product}` and `{floor}` placeholders.
    pub buyer_opening: String,
    /// Generated utterances allowed after the openers.
    pub max_exchanges: u32,
    /// Trailing utterances shown to the moderator.
    pub moderator_window: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            corridor: PriceCorridor::default(),
            product_name: "balloon".to_string(),
            seller_opening: DEFAULT_SELLER_OPENING.to_string(),
            buyer_opening: DEFAULT_BUYER_OPENING.to_string(),
            max_exchanges: 20,
            moderator_window: 4,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        self.corridor.validate()?;
        if self.max_exchanges == 0 {
            return Err(GameError::Config("max_exchanges must be positive".into()));
        }
        if self.moderator_window == 0 {
            return Err(GameError::Config("moderator_window must be positive".into()));
        }
        if self.product_name.trim().is_empty() {
            return Err(GameError::Config("product name must not be empty".into()));
        }
        if !self.seller_opening.contains("{ceiling}") {
            return Err(GameError::Config(
                "seller opening template lacks the {ceiling} placeholder".into(),
            ));
        }
        if !self.buyer_opening.contains("{floor}") {
            return Err(GameError::Config(
                "buyer opening template lacks the {floor} placeholder".into(),
            ));
        }
        Ok(())
    }

    fn render(&self, template: &str) -> String {
        let sym = &self.corridor.currency_symbol;
        template
            .replace("{product}", &self.product_name)
            .replace("{ceiling}", &self.corridor.ceiling.compact(sym))
            .replace("{floor}", &self.corridor.floor.compact(sym))
    }

    pub fn seller_opener(&self) -> String {
        self.render(&self.seller_opening)
    }

    pub fn buyer_opener(&self) -> String {
        self.render(&self.buyer_opening)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFlag {
    /// The deal price lies outside the corridor.
    OutOfCorridor,
    /// A deal was declared but no price could be extracted.
    DealPriceMissing,
}

/// One completed game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u32,
    pub transcript: Vec<Utterance>,
    pub terminal_state: GameState,
    /// Suggestions issued to the improved player after this game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Vec<String>>,
    pub improved_role: Role,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<RecordFlag>,
}

impl RoundRecord {
    pub fn deal_price(&self) -> Option<Price> {
        self.terminal_state.deal_price()
    }

    /// Utterances of `role` that were generated rather than injected.
    pub fn generated_by(&self, role: Role) -> impl Iterator<Item = &Utterance> {
        self.transcript
            .iter()
            .filter(move |u| u.speaker == role && !u.is_opener())
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid game configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corridor(#[from] CorridorError),
    #[error("protocol error: expected {expected} to speak, got {got}")]
    SpeakerOrder { expected: Role, got: Role },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("game already ended in state {0}")]
    Terminal(GameState),
    #[error("{role} backend failed after {} utterances: {source}", partial.len())]
    Agent {
        role: Role,
        #[source]
        source: AgentError,
        partial: Vec<Utterance>,
    },
    #[error("moderator failed after {} utterances: {source}", partial.len())]
    Moderator {
        #[source]
        source: ModeratorError,
        partial: Vec<Utterance>,
    },
}

impl GameError {
    /// Transcript accumulated before a backend failure.
    pub fn partial_transcript(&self) -> Option<&[Utterance]> {
        match self {
            GameError::Agent { partial, .. } | GameError::Moderator { partial, .. } => {
                Some(partial)
            }
            _ => None,
        }
    }
}

/// A single game in progress.
#[derive(Debug, Clone)]
pub struct Game {
    config: GameConfig,
    round_index: u32,
    transcript: Vec<Utterance>,
    state: GameState,
}

impl Game {
    /// Injects the two fixed opening moves and starts in `OnGoing`.
    pub fn open(config: GameConfig, round_index: u32) -> Result<Game, GameError> {
        config.validate()?;
        let transcript = vec![
            Utterance::new(Role::Seller, config.seller_opener(), round_index, 0),
            Utterance::new(Role::Buyer, config.buyer_opener(), round_index, 1),
        ];
        Ok(Game {
            config,
            round_index,
            transcript,
            state: GameState::OnGoing,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn transcript(&self) -> &[Utterance] {
        &self.transcript
    }

    pub fn state(&self) -> GameState {
        self.state
    }

    /// Generated utterances so far.
    pub fn exchanges(&self) -> u32 {
        (self.transcript.len() - 2) as u32
    }

    pub fn next_speaker(&self) -> Role {
        let last = self.transcript.last().expect("openers present").speaker;
        last.counterparty().expect("players only")
    }

    /// The trailing utterances the moderator may see.
    pub fn moderator_window(&self) -> &[Utterance] {
        let n = self.transcript.len();
        &self.transcript[n.saturating_sub(self.config.moderator_window)..]
    }

    /// Appends an utterance and adopts the moderator's verdict, unless the
    /// exchange cap is hit while the verdict is still `OnGoing`.
    pub fn step(
        &mut self,
        speaker: Role,
        text: impl Into<String>,
        verdict: GameState,
    ) -> Result<GameState, GameError> {
        if self.state.is_terminal() {
            return Err(GameError::Terminal(self.state));
        }
        let expected = self.next_speaker();
        if speaker != expected {
            return Err(GameError::SpeakerOrder {
                expected,
                got: speaker,
            });
        }
        let text = text.into();
        if text.trim().is_empty() {
            return Err(GameError::Protocol(format!("{speaker} produced an empty utterance")));
        }
        let turn = self.transcript.len() as u32;
        self.transcript
            .push(Utterance::new(speaker, text, self.round_index, turn));
        self.state = if !verdict.is_terminal() && self.exchanges() >= self.config.max_exchanges {
            GameState::NoDeal {
                reason: NoDealReason::TurnCapReached,
            }
        } else {
            verdict
        };
        Ok(self.state)
    }

    pub fn into_record(self, improved_role: Role) -> RoundRecord {
        let mut flags = Vec::new();
        if let GameState::Deal { price } = self.state {
            match price {
                Some(p) if !self.config.corridor.contains(p) => flags.push(RecordFlag::OutOfCorridor),
                Some(_) => {}
                None => flags.push(RecordFlag::DealPriceMissing),
            }
        }
        RoundRecord {
            round_index: self.round_index,
            transcript: self.transcript,
            terminal_state: self.state,
            feedback: None,
            improved_role,
            flags,
        }
    }
}

/// Round-level bookkeeping attached to the produced record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundMeta {
    pub round_index: u32,
    pub improved_role: Role,
}

impl Default for RoundMeta {
    fn default() -> Self {
        RoundMeta {
            round_index: 0,
            improved_role: Role::Seller,
        }
    }
}

/// Plays one game to a terminal state. The moderator is polled after every
/// generated utterance with the trailing window only.
pub fn run_game(
    seller: &mut dyn Agent,
    buyer: &mut dyn Agent,
    moderator: &mut dyn Moderator,
    config: &GameConfig,
    meta: RoundMeta,
) -> Result<RoundRecord, GameError> {
    let mut game = Game::open(config.clone(), meta.round_index)?;
    while !game.state().is_terminal() {
        let speaker = game.next_speaker();
        let agent: &mut dyn Agent = match speaker {
            Role::Seller => &mut *seller,
            _ => &mut *buyer,
        };
        let text = agent
            .respond(game.transcript())
            .map_err(|source| GameError::Agent {
                role: speaker,
                source,
                partial: game.transcript().to_vec(),
            })?;
        let mut window = game.moderator_window().to_vec();
        window.push(Utterance::new(
            speaker,
            text.clone(),
            meta.round_index,
            game.transcript().len() as u32,
        ));
        let start = window.len().saturating_sub(config.moderator_window);
        let verdict = moderator
            .classify(&window[start..])
            .map_err(|source| GameError::Moderator {
                source,
                partial: game.transcript().to_vec(),
            })?;
        game.step(speaker, text, verdict)?;
    }
    Ok(game.into_record(meta.improved_role))
}
