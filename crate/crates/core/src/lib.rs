//! Self-play bargaining between two chat agents, with in-context feedback
//! for one of them.
//!
//! A seller and a buyer haggle over a single item inside a fixed price
//! corridor. A moderator watches the last few turns and declares a deal,
//! a breakdown, or nothing yet. Across a session, one of the players sees
//! its earlier games plus a critic's suggestions and tries to do better;
//! the other starts from scratch each game.

pub mod agents;
pub mod game;
pub mod metrics;
pub mod moderator;
pub mod price;
pub mod session;

pub use agents::{Agent, AgentError, AgentSpec, BackendError, ChatBackend, EngineFamily, EngineId};
pub use game::{
    run_game, Game, GameConfig, GameError, GameState, NoDealReason, RecordFlag, Role, RoundMeta, RoundRecord,
    Utterance,
};
pub use metrics::{aggregate, bin_prices, response_length_curve, Histogram, SessionReport};
pub use moderator::{DemoBank, LabeledCorpus, Moderator, ModeratorError, StateLabel};
pub use price::{Price, PriceCorridor};
pub use session::{run_session, FeedbackMode, RunOutcome, SessionConfig};
