//! Resolves engine names to concrete players, critics and moderators.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{derived_rng, streams, Backends, FeedbackMode, RunInfo, ScriptedCritic, SessionConfig, DEFAULT_CRITIC_PROMPT};
use crate::agents::player::{render_persona, DEFAULT_BUYER_PERSONA, DEFAULT_SELLER_PERSONA};
use crate::agents::remote::RemoteSettings;
use crate::agents::{
    Agent, AgentSpec, BackendError, ChatBackend, ChatPlayer, ConcessionPolicy, EngineFamily, EngineId,
    ScriptedAgent,
};
use crate::game::{GameConfig, Role};
use crate::moderator::{DemoBank, FewShotModerator, Moderator, OracleModerator, DEFAULT_MODERATOR_INSTRUCTIONS};
use crate::price::Price;

/// Parameters of one scripted side. The opening always comes from the
/// corridor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedSide {
    pub reserve: Price,
    pub concession: Price,
    /// Each run draws its reserve uniformly from `reserve ± reserve_jitter`.
    #[serde(default)]
    pub reserve_jitter: Price,
    /// Reserve moves this much in the player's favour per feedback block.
    /// Only used when the side is the improved player.
    #[serde(default)]
    pub shift_per_feedback: Price,
}

impl ScriptedSide {
    pub fn seller_default() -> Self {
        ScriptedSide {
            reserve: Price::from_dollars(12),
            concession: Price::from_dollars(1),
            reserve_jitter: Price::ZERO,
            shift_per_feedback: Price::ZERO,
        }
    }

    pub fn buyer_default() -> Self {
        ScriptedSide {
            reserve: Price::from_dollars(18),
            concession: Price::from_cents(150),
            reserve_jitter: Price::ZERO,
            shift_per_feedback: Price::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedSetup {
    pub seller: ScriptedSide,
    pub buyer: ScriptedSide,
}

impl Default for ScriptedSetup {
    fn default() -> Self {
        ScriptedSetup {
            seller: ScriptedSide::seller_default(),
            buyer: ScriptedSide::buyer_default(),
        }
    }
}

impl ScriptedSetup {
    pub fn side(&self, role: Role) -> &ScriptedSide {
        match role {
            Role::Seller => &self.seller,
            _ => &self.buyer,
        }
    }

    /// The policy `role` plays in run `run_seed`. The jittered reserve is
    /// clamped into the corridor.
    pub fn policy(&self, role: Role, game: &GameConfig, run_seed: u64) -> Result<ConcessionPolicy, BackendError> {
        let side = self.side(role);
        let stream = if role == Role::Seller { streams::SELLER } else { streams::BUYER };
        let j = side.reserve_jitter.cents().abs();
        let offset = if j == 0 {
            0
        } else {
            derived_rng(run_seed, stream).random_range(-j..=j)
        };
        let corridor = &game.corridor;
        let reserve = Price::from_cents(side.reserve.cents() + offset).clamp(corridor.floor, corridor.ceiling);
        let policy = match role {
            Role::Seller => ConcessionPolicy::seller(corridor.ceiling, reserve, side.concession),
            _ => ConcessionPolicy::buyer(corridor.floor, reserve, side.concession),
        };
        policy.map_err(|e| BackendError::Config(format!("scripted {role}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptTemplates {
    pub seller_persona: String,
    pub buyer_persona: String,
    pub critic: String,
    pub moderator: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            seller_persona: DEFAULT_SELLER_PERSONA.into(),
            buyer_persona: DEFAULT_BUYER_PERSONA.into(),
            critic: DEFAULT_CRITIC_PROMPT.into(),
            moderator: DEFAULT_MODERATOR_INSTRUCTIONS.into(),
        }
    }
}

/// Scripted engines run locally, remote families go through
/// [`RemoteSettings`]. Without remote settings every remote engine is
/// refused, which is what offline mode relies on.
pub struct StandardBackends {
    pub scripted: ScriptedSetup,
    pub prompts: PromptTemplates,
    pub demo_bank: Arc<DemoBank>,
    pub remote: Option<Arc<RemoteSettings>>,
}

impl StandardBackends {
    pub fn offline(scripted: ScriptedSetup) -> Self {
        StandardBackends {
            scripted,
            prompts: PromptTemplates::default(),
            demo_bank: Arc::new(crate::moderator::bank::default_bank()),
            remote: None,
        }
    }

    fn check_engine(&self, what: &str, engine: &EngineId) -> Result<(), BackendError> {
        match engine.family {
            EngineFamily::Scripted => Ok(()),
            EngineFamily::Replay => Err(BackendError::Config(format!(
                "{what} engine 'replay' only exists inside the replay command"
            ))),
            _ => match &self.remote {
                None => Err(BackendError::Config(format!(
                    "{what} engine {engine} needs network access, which offline mode forbids"
                ))),
                Some(remote) => remote.check(engine),
            },
        }
    }

    /// Verifies every engine the session would touch can be built, so a
    /// missing key fails before any game starts.
    pub fn check(&self, config: &SessionConfig) -> Result<(), BackendError> {
        self.check_engine("improved", &config.improved_engine)?;
        self.check_engine("rival", &config.rival_engine)?;
        self.check_engine("moderator", &config.moderator_engine)?;
        if config.feedback_mode == FeedbackMode::AiCritic {
            self.check_engine("critic", config.critic_engine())?;
        }
        Ok(())
    }

    fn remote_backend(&self, engine: &EngineId, jitter_seed: u64) -> Result<Arc<dyn ChatBackend>, BackendError> {
        let remote = self
            .remote
            .as_ref()
            .ok_or_else(|| BackendError::Config(format!("{engine} needs network access")))?;
        Ok(Arc::new(remote.backend(engine, jitter_seed)?))
    }

    fn player(
        &self,
        role: Role,
        engine: &EngineId,
        config: &SessionConfig,
        run: &RunInfo,
        jitter_seed: u64,
        improved: bool,
    ) -> Result<Box<dyn Agent>, BackendError> {
        self.check_engine(role.label(), engine)?;
        if engine.family == EngineFamily::Scripted {
            let policy = self.scripted.policy(role, &config.game, run.seed)?;
            let mut agent = ScriptedAgent::new(role, policy).with_symbol(config.game.corridor.currency_symbol.clone());
            if improved {
                agent = agent.with_feedback_shift(self.scripted.side(role).shift_per_feedback);
            }
            return Ok(Box::new(agent));
        }
        let template = match role {
            Role::Seller => &self.prompts.seller_persona,
            _ => &self.prompts.buyer_persona,
        };
        let spec = AgentSpec::new(
            role,
            engine.clone(),
            render_persona(template, role, &config.game.product_name),
        );
        Ok(Box::new(ChatPlayer::new(spec, self.remote_backend(engine, jitter_seed)?)))
    }
}

impl Backends for StandardBackends {
    fn improved_player(&self, config: &SessionConfig, run: &RunInfo) -> Result<Box<dyn Agent>, BackendError> {
        let jitter = derived_rng(run.seed, streams::IMPROVED_JITTER).next_u64();
        self.player(config.improved_role, &config.improved_engine, config, run, jitter, true)
    }

    fn rival_player(
        &self,
        config: &SessionConfig,
        run: &RunInfo,
        round_index: u32,
    ) -> Result<Box<dyn Agent>, BackendError> {
        let jitter = derived_rng(run.seed, streams::RIVAL_JITTER).next_u64() ^ round_index as u64;
        self.player(config.rival_role(), &config.rival_engine, config, run, jitter, false)
    }

    fn critic(&self, config: &SessionConfig, run: &RunInfo) -> Result<Arc<dyn ChatBackend>, BackendError> {
        let engine = config.critic_engine();
        self.check_engine("critic", engine)?;
        if engine.family == EngineFamily::Scripted {
            return Ok(Arc::new(ScriptedCritic));
        }
        let jitter = derived_rng(run.seed, streams::CRITIC_JITTER).next_u64();
        self.remote_backend(engine, jitter)
    }

    fn moderator(&self, config: &SessionConfig, run: &RunInfo) -> Result<Box<dyn Moderator>, BackendError> {
        let engine = &config.moderator_engine;
        self.check_engine("moderator", engine)?;
        let cap = config.game.moderator_window;
        if engine.family == EngineFamily::Scripted {
            return Ok(Box::new(OracleModerator::with_window_cap(cap)));
        }
        let jitter = derived_rng(run.seed, streams::MODERATOR_JITTER).next_u64();
        let backend = self.remote_backend(engine, jitter)?;
        Ok(Box::new(
            FewShotModerator::new(self.demo_bank.clone(), backend, cap).with_instructions(self.prompts.moderator.clone()),
        ))
    }

    fn critic_prompt(&self) -> &str {
        &self.prompts.critic
    }
}
