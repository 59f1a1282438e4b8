//! Multi-round sessions where one player learns from feedback in context.
//!
//! Each run plays `rounds` games in sequence. The improved player keeps a
//! growing [`ImprovedPlayerContext`] across games; its rival and the
//! moderator are rebuilt from scratch for every game. Runs are independent
//! and may execute in parallel.

pub mod context;
pub mod feedback;
pub mod standard;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, BackendError, ChatBackend, EngineId};
use crate::game::{run_game, GameConfig, GameError, Role, RoundMeta, RoundRecord, Utterance};
use crate::moderator::Moderator;

pub use context::{ContextBlock, ImprovedPlayerContext};
pub use feedback::{
    critic_feedback, default_human_pool, human_pool_feedback, parse_suggestions, FeedbackError,
    ScriptedCritic, DEFAULT_CRITIC_PROMPT, FEEDBACK_SIZE,
};
pub use standard::{PromptTemplates, ScriptedSetup, ScriptedSide, StandardBackends};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackMode {
    AiCritic,
    HumanPool { pool: Vec<String>, sample_size: usize },
    None,
}

impl FeedbackMode {
    pub fn default_human_pool() -> Self {
        FeedbackMode::HumanPool {
            pool: default_human_pool(),
            sample_size: FEEDBACK_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub improved_role: Role,
    pub improved_engine: EngineId,
    pub rival_engine: EngineId,
    /// Falls back to the improved player's engine when unset.
    pub critic_engine: Option<EngineId>,
    pub moderator_engine: EngineId,
    pub rounds: u32,
    pub runs: u32,
    pub feedback_mode: FeedbackMode,
    pub seed: u64,
    pub game: GameConfig,
    /// Execution setting only; not part of a session's identity.
    #[serde(skip, default = "one")]
    pub parallelism: usize,
}

fn one() -> usize {
    1
}

impl SessionConfig {
    pub fn new(improved_role: Role, improved_engine: EngineId) -> Self {
        SessionConfig {
            improved_role,
            improved_engine,
            rival_engine: EngineId::gpt35(),
            critic_engine: None,
            moderator_engine: EngineId::gpt35(),
            rounds: 2,
            runs: 1,
            feedback_mode: FeedbackMode::AiCritic,
            seed: 0,
            game: GameConfig::default(),
            parallelism: 1,
        }
    }

    pub fn critic_engine(&self) -> &EngineId {
        self.critic_engine.as_ref().unwrap_or(&self.improved_engine)
    }

    pub fn rival_role(&self) -> Role {
        self.improved_role.counterparty().unwrap_or(Role::Buyer)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if !self.improved_role.is_player() {
            return Err(SessionError::Config(format!(
                "improved role must be seller or buyer, got {}",
                self.improved_role
            )));
        }
        if self.rounds == 0 || self.runs == 0 {
            return Err(SessionError::Config("rounds and runs must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(SessionError::Config("parallelism must be positive".into()));
        }
        if let FeedbackMode::HumanPool { pool, sample_size } = &self.feedback_mode {
            if *sample_size != FEEDBACK_SIZE {
                return Err(SessionError::Config(format!(
                    "human pool sample size must be {FEEDBACK_SIZE}, got {sample_size}"
                )));
            }
            if pool.len() < *sample_size {
                return Err(SessionError::Config(format!(
                    "human pool has {} suggestions, needs at least {sample_size}",
                    pool.len()
                )));
            }
        }
        self.game
            .validate()
            .map_err(|e| SessionError::Config(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session configuration: {0}")]
    Config(String),
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("record sink failed: {0}")]
    Sink(String),
}

/// Identifies one run and carries its derived seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunInfo {
    pub run_index: u32,
    pub seed: u64,
}

/// Streams split off a run seed. Backends draw from their own stream so
/// adding randomness in one place never shifts another.
pub mod streams {
    pub const FEEDBACK: u64 = 1;
    pub const SELLER: u64 = 2;
    pub const BUYER: u64 = 3;
    pub const IMPROVED_JITTER: u64 = 4;
    pub const RIVAL_JITTER: u64 = 5;
    pub const CRITIC_JITTER: u64 = 6;
    pub const MODERATOR_JITTER: u64 = 7;
}

/// Seed for run `run_index`, independent of how many runs exist or the
/// order they execute in.
pub fn run_seed(session_seed: u64, run_index: u32) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(session_seed);
    rng.set_stream(run_index as u64);
    rng.next_u64()
}

pub fn derived_rng(run_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(stream);
    rng
}

/// Supplies the participants of a session. The improved player and critic
/// live for a whole run; rival and moderator are requested per round.
pub trait Backends: Send + Sync {
    fn improved_player(&self, config: &SessionConfig, run: &RunInfo) -> Result<Box<dyn Agent>, BackendError>;

    fn rival_player(
        &self,
        config: &SessionConfig,
        run: &RunInfo,
        round_index: u32,
    ) -> Result<Box<dyn Agent>, BackendError>;

    fn critic(&self, config: &SessionConfig, run: &RunInfo) -> Result<Arc<dyn ChatBackend>, BackendError>;

    fn moderator(&self, config: &SessionConfig, run: &RunInfo) -> Result<Box<dyn Moderator>, BackendError>;

    fn critic_prompt(&self) -> &str {
        DEFAULT_CRITIC_PROMPT
    }
}

/// Why a run stopped early. Rounds completed before the failure are kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunAbort {
    pub round_index: u32,
    pub error: String,
    pub partial_transcript: Vec<Utterance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_index: u32,
    pub records: Vec<RoundRecord>,
    pub aborted: Option<RunAbort>,
}

impl RunOutcome {
    pub fn is_aborted(&self) -> bool {
        self.aborted.is_some()
    }
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct SinkError(pub String);

/// Receives each run once it finishes, possibly from several threads.
pub trait RunSink: Send + Sync {
    fn accept(&self, outcome: &RunOutcome) -> Result<(), SinkError>;
}

pub struct NullSink;

impl RunSink for NullSink {
    fn accept(&self, _: &RunOutcome) -> Result<(), SinkError> {
        Ok(())
    }
}

/// Forwards runs to `inner` in run-index order, holding back runs that
/// finish early until their predecessors arrive.
pub struct OrderedSink<S> {
    inner: S,
    state: Mutex<(u32, BTreeMap<u32, RunOutcome>)>,
}

impl<S: RunSink> OrderedSink<S> {
    pub fn new(inner: S) -> Self {
        OrderedSink {
            inner,
            state: Mutex::new((0, BTreeMap::new())),
        }
    }

    pub fn into_inner(self) -> S {
        self.inner
    }

    /// Runs received but not yet forwarded.
    pub fn pending(&self) -> usize {
        self.state.lock().expect("sink poisoned").1.len()
    }
}

impl<S: RunSink> RunSink for OrderedSink<S> {
    fn accept(&self, outcome: &RunOutcome) -> Result<(), SinkError> {
        let mut guard = self.state.lock().expect("sink poisoned");
        let (next, pending) = &mut *guard;
        pending.insert(outcome.run_index, outcome.clone());
        while let Some(ready) = pending.remove(next) {
            self.inner.accept(&ready)?;
            *next += 1;
        }
        Ok(())
    }
}

fn abort(round_index: u32, error: impl ToString, partial: Vec<Utterance>) -> RunAbort {
    RunAbort {
        round_index,
        error: error.to_string(),
        partial_transcript: partial,
    }
}

fn produce_feedback(
    config: &SessionConfig,
    backends: &dyn Backends,
    critic: Option<&Arc<dyn ChatBackend>>,
    context: &ImprovedPlayerContext,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<String>>, FeedbackError> {
    match &config.feedback_mode {
        FeedbackMode::None => Ok(None),
        FeedbackMode::HumanPool { pool, sample_size } => {
            human_pool_feedback(pool, *sample_size, rng).map(Some)
        }
        FeedbackMode::AiCritic => {
            let critic = critic.expect("critic built for AI feedback");
            critic_feedback(
                context,
                config.improved_role,
                critic.as_ref(),
                backends.critic_prompt(),
                &config.game.product_name,
                config.critic_engine().family.default_temperature(),
            )
            .map(Some)
        }
    }
}

/// Plays every round of one run.
pub fn run_single(config: &SessionConfig, backends: &dyn Backends, run_index: u32) -> RunOutcome {
    let run = RunInfo {
        run_index,
        seed: run_seed(config.seed, run_index),
    };
    let mut records = Vec::with_capacity(config.rounds as usize);
    let aborted = play_rounds(config, backends, &run, &mut records).err();
    if let Some(a) = &aborted {
        log::warn!("run {run_index} aborted in round {}: {}", a.round_index, a.error);
    }
    RunOutcome {
        run_index,
        records,
        aborted,
    }
}

fn play_rounds(
    config: &SessionConfig,
    backends: &dyn Backends,
    run: &RunInfo,
    records: &mut Vec<RoundRecord>,
) -> Result<(), RunAbort> {
    let mut improved = backends
        .improved_player(config, run)
        .map_err(|e| abort(0, e, Vec::new()))?;
    let critic = match config.feedback_mode {
        FeedbackMode::AiCritic => Some(backends.critic(config, run).map_err(|e| abort(0, e, Vec::new()))?),
        _ => None,
    };
    let mut feedback_rng = derived_rng(run.seed, streams::FEEDBACK);
    let mut context = ImprovedPlayerContext::new();

    for round in 0..config.rounds {
        improved.set_context(&context);
        let mut rival = backends
            .rival_player(config, run, round)
            .map_err(|e| abort(round, e, Vec::new()))?;
        let mut moderator = backends
            .moderator(config, run)
            .map_err(|e| abort(round, e, Vec::new()))?;
        let (seller, buyer): (&mut dyn Agent, &mut dyn Agent) = match config.improved_role {
            Role::Seller => (improved.as_mut(), rival.as_mut()),
            _ => (rival.as_mut(), improved.as_mut()),
        };
        let meta = RoundMeta {
            round_index: round,
            improved_role: config.improved_role,
        };
        let mut record = run_game(seller, buyer, moderator.as_mut(), &config.game, meta)
            .map_err(|e: GameError| {
                let partial = e.partial_transcript().map(<[_]>::to_vec).unwrap_or_default();
                abort(round, e, partial)
            })?;

        context.push_round(&record);
        if round + 1 < config.rounds {
            let fb = produce_feedback(config, backends, critic.as_ref(), &context, &mut feedback_rng)
                .map_err(|e| abort(round, e, record.transcript.clone()))?;
            if let Some(fb) = fb {
                context.attach_feedback(fb.clone());
                record.feedback = Some(fb);
            }
        }
        records.push(record);
    }
    Ok(())
}

/// Runs the whole session. Each finished run is handed to `sink` (from
/// worker threads when `parallelism > 1`); the returned outcomes are in
/// run order.
pub fn run_session(
    config: &SessionConfig,
    backends: &dyn Backends,
    sink: &dyn RunSink,
) -> Result<Vec<RunOutcome>, SessionError> {
    config.validate()?;
    let sink_error: Mutex<Option<SinkError>> = Mutex::new(None);
    let play = |run_index: u32| {
        let outcome = run_single(config, backends, run_index);
        if let Err(e) = sink.accept(&outcome) {
            sink_error.lock().expect("poisoned").get_or_insert(e);
        }
        outcome
    };
    let outcomes: Vec<RunOutcome> = if config.parallelism == 1 {
        (0..config.runs).map(play).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| SessionError::Pool(e.to_string()))?;
        pool.install(|| (0..config.runs).into_par_iter().map(play).collect())
    };
    if let Some(e) = sink_error.into_inner().expect("poisoned") {
        return Err(SessionError::Sink(e.0));
    }
    Ok(outcomes)
}
