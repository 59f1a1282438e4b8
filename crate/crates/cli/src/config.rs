//! Experiment configuration file (TOML).
//!
//! Every key is optional. A minimal offline file:
//!
//! ```toml
//! [session]
//! improved_engine = "scripted"
//! rival_engine = "scripted"
//! moderator_engine = "scripted"
//! rounds = 2
//! runs = 5
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use haggle_core::agents::remote::RemoteSettings;
use haggle_core::moderator::DemoBank;
use haggle_core::session::feedback::parse_pool;
use haggle_core::session::{
    default_human_pool, FeedbackMode, PromptTemplates, ScriptedSetup, SessionConfig, StandardBackends, FEEDBACK_SIZE,
};
use haggle_core::{EngineFamily, EngineId, GameConfig, Role};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    AiCritic,
    HumanPool,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub improved_role: Role,
    pub improved_engine: EngineId,
    pub rival_engine: EngineId,
    pub critic_engine: Option<EngineId>,
    pub moderator_engine: EngineId,
    pub rounds: u32,
    pub runs: u32,
    pub seed: u64,
    pub parallelism: usize,
    pub feedback: FeedbackKind,
    /// One suggestion per line; the built-in pool is used when absent.
    pub human_pool_file: Option<PathBuf>,
}

impl Default for SessionSection {
    fn default() -> Self {
        SessionSection {
            improved_role: Role::Seller,
            improved_engine: EngineId::gpt35(),
            rival_engine: EngineId::gpt35(),
            critic_engine: None,
            moderator_engine: EngineId::gpt35(),
            rounds: 2,
            runs: 1,
            seed: 0,
            parallelism: 1,
            feedback: FeedbackKind::AiCritic,
            human_pool_file: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersSection {
    pub requests_per_minute: u32,
    /// Keyed by family: `gpt`, `claude`, `cohere`, `j2`.
    pub base_urls: BTreeMap<String, String>,
}

impl Default for ProvidersSection {
    fn default() -> Self {
        ProvidersSection {
            requests_per_minute: 60,
            base_urls: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeratorSection {
    pub demo_bank: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub session: SessionSection,
    pub game: GameConfig,
    pub scripted: ScriptedSetup,
    pub prompts: PromptTemplates,
    pub providers: ProvidersSection,
    pub moderator: ModeratorSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub runs: Option<u32>,
    pub rounds: Option<u32>,
    pub improved_engine: Option<EngineId>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        let s = &mut self.session;
        if let Some(v) = o.seed {
            s.seed = v;
        }
        if let Some(v) = o.parallelism {
            s.parallelism = v;
        }
        if let Some(v) = o.runs {
            s.runs = v;
        }
        if let Some(v) = o.rounds {
            s.rounds = v;
        }
        if let Some(v) = &o.improved_engine {
            s.improved_engine = v.clone();
        }
    }

    pub fn session_config(&self) -> Result<SessionConfig, CliError> {
        let s = &self.session;
        let feedback_mode = match s.feedback {
            FeedbackKind::AiCritic => FeedbackMode::AiCritic,
            FeedbackKind::None => FeedbackMode::None,
            FeedbackKind::HumanPool => {
                let pool = match &s.human_pool_file {
                    Some(p) => {
                        let path = self.resolve_path(p);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                        parse_pool(&text)
                    }
                    None => default_human_pool(),
                };
                FeedbackMode::HumanPool {
                    pool,
                    sample_size: FEEDBACK_SIZE,
                }
            }
        };
        let cfg = SessionConfig {
            improved_role: s.improved_role,
            improved_engine: s.improved_engine.clone(),
            rival_engine: s.rival_engine.clone(),
            critic_engine: s.critic_engine.clone(),
            moderator_engine: s.moderator_engine.clone(),
            rounds: s.rounds,
            runs: s.runs,
            feedback_mode,
            seed: s.seed,
            game: self.game.clone(),
            parallelism: s.parallelism,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn demo_bank(&self) -> Result<DemoBank, CliError> {
        match &self.moderator.demo_bank {
            Some(p) => DemoBank::load(&self.resolve_path(p)).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(haggle_core::moderator::bank::default_bank()),
        }
    }

    /// `None` when offline: every remote engine is then refused.
    pub fn remote_settings(&self, offline: bool) -> Result<Option<Arc<RemoteSettings>>, CliError> {
        if offline {
            return Ok(None);
        }
        let mut remote = RemoteSettings::default().with_env_keys();
        remote.requests_per_minute = self.providers.requests_per_minute.max(1);
        for (family, url) in &self.providers.base_urls {
            let family = match family.as_str() {
                "gpt" => EngineFamily::Gpt,
                "claude" => EngineFamily::Claude,
                "cohere" => EngineFamily::Cohere,
                "j2" => EngineFamily::J2,
                other => return Err(CliError::Config(format!("unknown provider family {other:?}"))),
            };
            remote.base_urls.insert(family, url.clone());
        }
        Ok(Some(Arc::new(remote)))
    }

    pub fn backends(&self, offline: bool) -> Result<StandardBackends, CliError> {
        Ok(StandardBackends {
            scripted: self.scripted,
            prompts: self.prompts.clone(),
            demo_bank: Arc::new(self.demo_bank()?),
            remote: self.remote_settings(offline)?,
        })
    }
}
