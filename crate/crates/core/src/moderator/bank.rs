//! The moderator's few-shot demonstration bank and labeled corpora.
//!
//! Both are stored as TOML:
//!
//! ```toml
//! version = 3
//!
//! [[demo]]
//! label = "NO DEAL"
//! window = ["Seller: $18 is my final price.", "Buyer: Then I'll pass, thanks."]
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::StateLabel;
use crate::game::{Role, Utterance};

/// One line of a stored window.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Turn {
    pub speaker: Role,
    pub text: String,
}

impl Turn {
    pub fn new(speaker: Role, text: impl Into<String>) -> Self {
        Turn {
            speaker,
            text: text.into(),
        }
    }
}

impl fmt::Display for Turn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.speaker.label(), self.text)
    }
}

impl std::str::FromStr for Turn {
    type Err = BankError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (who, text) = s
            .split_once(':')
            .ok_or_else(|| BankError::Parse(format!("turn lacks a speaker prefix: {s:?}")))?;
        let speaker = Role::parse(who)
            .filter(|r| r.is_player())
            .ok_or_else(|| BankError::Parse(format!("unknown speaker {who:?}")))?;
        Ok(Turn::new(speaker, text.trim()))
    }
}

impl Serialize for Turn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Turn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demo {
    pub label: StateLabel,
    pub window: Vec<Turn>,
}

impl Demo {
    pub fn new(label: StateLabel, window: Vec<Turn>) -> Self {
        Demo { label, window }
    }

    /// Identity used for deduplication.
    pub fn key(&self) -> String {
        window_key(&self.window)
    }

    pub fn utterances(&self) -> Vec<Utterance> {
        self.window
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance::new(t.speaker, t.text.clone(), 0, i as u32 + 2))
            .collect()
    }
}

pub fn window_key(window: &[Turn]) -> String {
    window
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("demo bank is empty")]
    Empty,
    #[error("demo bank has no NO DEAL demonstration")]
    NoNoDeal,
    #[error("demo with empty window at position {0}")]
    EmptyWindow(usize),
    #[error("window labeled both {existing} and {incoming}:\n{window}")]
    Conflict {
        window: String,
        existing: StateLabel,
        incoming: StateLabel,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoBank {
    #[serde(default = "first_version")]
    pub version: u32,
    #[serde(default, rename = "demo")]
    pub demos: Vec<Demo>,
}

fn first_version() -> u32 {
    1
}

impl DemoBank {
    pub fn new(demos: Vec<Demo>) -> Result<Self, BankError> {
        let bank = DemoBank { version: 1, demos };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<(), BankError> {
        if self.demos.is_empty() {
            return Err(BankError::Empty);
        }
        if let Some(i) = self.demos.iter().position(|d| d.window.is_empty()) {
            return Err(BankError::EmptyWindow(i));
        }
        if !self.demos.iter().any(|d| d.label == StateLabel::NoDeal) {
            return Err(BankError::NoNoDeal);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn from_toml(text: &str) -> Result<Self, BankError> {
        let bank: DemoBank = toml::from_str(text).map_err(|e| BankError::Parse(e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("demo bank serializes")
    }

    pub fn load(path: &Path) -> Result<Self, BankError> {
        Self::from_toml(&read(path)?)
    }

    /// Appends corrected demonstrations, skipping windows already present
    /// with the same label. Bumps the version when anything was added.
    pub fn harden(&self, corrections: &[Demo]) -> Result<DemoBank, BankError> {
        let mut seen: HashMap<String, StateLabel> =
            self.demos.iter().map(|d| (d.key(), d.label)).collect();
        let mut out = self.clone();
        for demo in corrections {
            if demo.window.is_empty() {
                return Err(BankError::EmptyWindow(out.demos.len()));
            }
            let key = demo.key();
            match seen.get(&key) {
                Some(&existing) if existing == demo.label => continue,
                Some(&existing) => {
                    return Err(BankError::Conflict {
                        window: key,
                        existing,
                        incoming: demo.label,
                    })
                }
                None => {
                    seen.insert(key, demo.label);
                    out.demos.push(demo.clone());
                }
            }
        }
        if out.demos.len() > self.demos.len() {
            out.version += 1;
        }
        Ok(out)
    }
}

/// A labeled evaluation set in the same file format as a bank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledCorpus {
    #[serde(default, rename = "demo")]
    pub items: Vec<Demo>,
}

impl LabeledCorpus {
    pub fn from_toml(text: &str) -> Result<Self, BankError> {
        let corpus: LabeledCorpus =
            toml::from_str(text).map_err(|e| BankError::Parse(e.to_string()))?;
        if let Some(i) = corpus.items.iter().position(|d| d.window.is_empty()) {
            return Err(BankError::EmptyWindow(i));
        }
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self, BankError> {
        Self::from_toml(&read(path)?)
    }
}

/// Renders demos as `[[demo]]` tables ready to paste into a bank file.
pub fn demos_to_toml(demos: &[Demo]) -> String {
    LabeledCorpus {
        items: demos.to_vec(),
    }
    .to_toml()
}

impl LabeledCorpus {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("corpus serializes")
    }
}

fn read(path: &Path) -> Result<String, BankError> {
    std::fs::read_to_string(path).map_err(|source| BankError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Demo bank shipped with the crate.
pub const DEFAULT_BANK_TOML: &str = include_str!("../../data/demo_bank.toml");
/// Labeled corpus shipped with the crate.
pub const DEFAULT_CORPUS_TOML: &str = include_str!("../../data/moderator_corpus.toml");

pub fn default_bank() -> DemoBank {
    DemoBank::from_toml(DEFAULT_BANK_TOML).expect("shipped demo bank is valid")
}

pub fn default_corpus() -> LabeledCorpus {
    LabeledCorpus::from_toml(DEFAULT_CORPUS_TOML).expect("shipped corpus is valid")
}
