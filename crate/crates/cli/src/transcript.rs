//! Newline-delimited JSON transcript log.
//!
//! The first line is a session header holding everything needed to re-run
//! the session. Every following line is one round record or one abort
//! notice, each self-contained and tagged with the session id, so lines can
//! be sorted by `(run_index, round_index)` without losing anything.
//!
//! ```text
//! {"kind":"session","schema_version":1,"session_id":"…","config":{…},"scripted":{…},"prompts":{…},"demo_bank_version":1}
//! {"kind":"round","schema_version":1,"session_id":"…","run_index":0,"round_index":0,"record":{…}}
//! {"kind":"aborted","schema_version":1,"session_id":"…","run_index":3,"abort":{…}}
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Mutex;

use haggle_core::session::{PromptTemplates, RunAbort, RunSink, ScriptedSetup, SinkError};
use haggle_core::{RoundRecord, RunOutcome, SessionConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything that determines a session's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub config: SessionConfig,
    pub scripted: ScriptedSetup,
    pub prompts: PromptTemplates,
    pub demo_bank_version: u32,
}

impl SessionHeader {
    /// The id is the first 16 hex digits of the SHA-256 of the header's
    /// other fields, so equal setups share an id. Parallelism is not part
    /// of a session's identity and is reset to 1.
    pub fn new(mut config: SessionConfig, scripted: ScriptedSetup, prompts: PromptTemplates, demo_bank_version: u32) -> Self {
        config.parallelism = 1;
        let mut header = SessionHeader {
            session_id: String::new(),
            config,
            scripted,
            prompts,
            demo_bank_version,
        };
        header.session_id = header.compute_id();
        header
    }

    pub fn compute_id(&self) -> String {
        let content = serde_json::to_vec(&(&self.config, &self.scripted, &self.prompts, self.demo_bank_version))
            .expect("header serializes");
        hex::encode(Sha256::digest(&content))[..16].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Session {
        schema_version: u32,
        #[serde(flatten)]
        header: SessionHeader,
    },
    Round {
        schema_version: u32,
        session_id: String,
        run_index: u32,
        round_index: u32,
        record: RoundRecord,
    },
    Aborted {
        schema_version: u32,
        session_id: String,
        run_index: u32,
        abort: RunAbort,
    },
}

impl LogLine {
    fn schema_version(&self) -> u32 {
        match self {
            LogLine::Session { schema_version, .. }
            | LogLine::Round { schema_version, .. }
            | LogLine::Aborted { schema_version, .. } => *schema_version,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log line serializes")
    }
}

/// The lines one run contributes, in order.
pub fn run_lines(session_id: &str, outcome: &RunOutcome) -> Vec<LogLine> {
    let mut lines: Vec<LogLine> = outcome
        .records
        .iter()
        .map(|r| LogLine::Round {
            schema_version: SCHEMA_VERSION,
            session_id: session_id.to_string(),
            run_index: outcome.run_index,
            round_index: r.round_index,
            record: r.clone(),
        })
        .collect();
    if let Some(abort) = &outcome.aborted {
        lines.push(LogLine::Aborted {
            schema_version: SCHEMA_VERSION,
            session_id: session_id.to_string(),
            run_index: outcome.run_index,
            abort: abort.clone(),
        });
    }
    lines
}

/// Single writer behind a lock; wrap it in an `OrderedSink` to get lines
/// in run order whatever the parallelism.
pub struct LogWriter<W: Write + Send> {
    session_id: String,
    out: Mutex<W>,
}

impl<W: Write + Send> LogWriter<W> {
    /// Writes the header line immediately.
    pub fn new(mut out: W, header: &SessionHeader) -> std::io::Result<Self> {
        let line = LogLine::Session {
            schema_version: SCHEMA_VERSION,
            header: header.clone(),
        };
        writeln!(out, "{}", line.to_json())?;
        Ok(LogWriter {
            session_id: header.session_id.clone(),
            out: Mutex::new(out),
        })
    }

    pub fn into_inner(self) -> W {
        self.out.into_inner().expect("log writer poisoned")
    }
}

impl<W: Write + Send> RunSink for LogWriter<W> {
    fn accept(&self, outcome: &RunOutcome) -> Result<(), SinkError> {
        let mut out = self.out.lock().expect("log writer poisoned");
        for line in run_lines(&self.session_id, outcome) {
            writeln!(out, "{}", line.to_json()).map_err(|e| SinkError(e.to_string()))?;
        }
        out.flush().map_err(|e| SinkError(e.to_string()))
    }
}

/// One session read back from a log.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedSession {
    pub header: SessionHeader,
    /// Sorted by run index; rounds within a run sorted by round index.
    pub runs: Vec<RunOutcome>,
}

impl LoggedSession {
    pub fn record(&self, run_index: u32, round_index: u32) -> Option<&RoundRecord> {
        self.runs
            .iter()
            .find(|r| r.run_index == run_index)?
            .records
            .iter()
            .find(|r| r.round_index == round_index)
    }

    pub fn record_count(&self) -> usize {
        self.runs.iter().map(|r| r.records.len()).sum()
    }
}

/// Parses a log. Several concatenated sessions are allowed; lines may
/// appear in any order after their session's header.
pub fn read_log<R: BufRead>(input: R) -> Result<Vec<LoggedSession>, CliError> {
    let mut headers: Vec<SessionHeader> = Vec::new();
    let mut runs: BTreeMap<(String, u32), RunOutcome> = BTreeMap::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = n + 1;
        let parsed: LogLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Analysis(format!("log line {lineno}: {e}")))?;
        if parsed.schema_version() != SCHEMA_VERSION {
            return Err(CliError::Analysis(format!(
                "log line {lineno}: schema version {} is not supported (expected {SCHEMA_VERSION})",
                parsed.schema_version()
            )));
        }
        let entry = |id: &str, run_index: u32| -> Result<(String, u32), CliError> {
            if !headers.iter().any(|h| h.session_id == id) {
                return Err(CliError::Analysis(format!(
                    "log line {lineno}: session {id} has no header"
                )));
            }
            Ok((id.to_string(), run_index))
        };
        match parsed {
            LogLine::Session { header, .. } => {
                if header.compute_id() != header.session_id {
                    return Err(CliError::Analysis(format!(
                        "log line {lineno}: session header does not match its id {}",
                        header.session_id
                    )));
                }
                if !headers.iter().any(|h| h.session_id == header.session_id) {
                    headers.push(header);
                }
            }
            LogLine::Round {
                session_id,
                run_index,
                round_index,
                record,
                ..
            } => {
                if record.round_index != round_index {
                    return Err(CliError::Analysis(format!(
                        "log line {lineno}: round index {round_index} disagrees with its record"
                    )));
                }
                let key = entry(&session_id, run_index)?;
                runs.entry(key)
                    .or_insert_with(|| RunOutcome {
                        run_index,
                        records: Vec::new(),
                        aborted: None,
                    })
                    .records
                    .push(record);
            }
            LogLine::Aborted {
                session_id,
                run_index,
                abort,
                ..
            } => {
                let key = entry(&session_id, run_index)?;
                runs.entry(key)
                    .or_insert_with(|| RunOutcome {
                        run_index,
                        records: Vec::new(),
                        aborted: None,
                    })
                    .aborted = Some(abort);
            }
        }
    }
    let mut sessions: Vec<LoggedSession> = headers
        .into_iter()
        .map(|header| LoggedSession { header, runs: Vec::new() })
        .collect();
    for ((id, _), mut outcome) in runs {
        outcome.records.sort_by_key(|r| r.round_index);
        let session = sessions
            .iter_mut()
            .find(|s| s.header.session_id == id)
            .expect("checked above");
        session.runs.push(outcome);
    }
    Ok(sessions)
}

pub fn read_log_file(path: &std::path::Path) -> Result<Vec<LoggedSession>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Analysis(format!("cannot open {}: {e}", path.display())))?;
    read_log(std::io::BufReader::new(file))
}

/// Exactly one session, or an error naming the problem.
pub fn single_session(mut sessions: Vec<LoggedSession>) -> Result<LoggedSession, CliError> {
    match sessions.len() {
        0 => Err(CliError::Analysis("log has no session header".into())),
        1 => Ok(sessions.pop().expect("one session")),
        n => Err(CliError::Analysis(format!("log holds {n} sessions, expected one"))),
    }
}
