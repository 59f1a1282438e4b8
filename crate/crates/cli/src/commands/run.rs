//! `haggle run`: play a session and stream its transcripts to disk.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use haggle_core::session::{OrderedSink, StandardBackends};
use haggle_core::{aggregate, run_session, RunOutcome, SessionConfig};

use super::{create_out_dir, load_config, summary_table};
use crate::config::Overrides;
use crate::transcript::{LogWriter, SessionHeader};
use crate::{CliError, RunArgs, SharedArgs};

pub const LOG_FILE: &str = "transcripts.jsonl";

pub struct RunResult {
    pub log_path: PathBuf,
    pub outcomes: Vec<RunOutcome>,
}

/// Everything up to the first game: config, engine checks, header.
pub fn prepare(shared: &SharedArgs, args: &RunArgs) -> Result<(SessionConfig, StandardBackends, SessionHeader), CliError> {
    let cfg = load_config(
        shared,
        Overrides {
            runs: args.runs,
            rounds: args.rounds,
            improved_engine: args.engine_improved.clone(),
            ..Overrides::default()
        },
    )?;
    let session = cfg.session_config()?;
    let backends = cfg.backends(shared.offline)?;
    backends.check(&session).map_err(|e| CliError::Config(e.to_string()))?;
    let header = SessionHeader::new(
        session.clone(),
        backends.scripted,
        backends.prompts.clone(),
        backends.demo_bank.version,
    );
    Ok((session, backends, header))
}

pub fn execute(shared: &SharedArgs, args: &RunArgs) -> Result<RunResult, CliError> {
    let (session, backends, header) = prepare(shared, args)?;
    let dir = create_out_dir(shared)?;
    let log_path = dir.join(LOG_FILE);
    let file = File::create(&log_path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", log_path.display())))?;
    let sink = OrderedSink::new(LogWriter::new(BufWriter::new(file), &header)?);
    log::info!(
        "session {}: {} runs x {} rounds, parallelism {}",
        header.session_id,
        session.runs,
        session.rounds,
        session.parallelism
    );
    let outcomes = run_session(&session, &backends, &sink).map_err(|e| CliError::Io(e.to_string()))?;
    drop(sink.into_inner().into_inner());

    if let Ok(report) = aggregate(&outcomes, &session.game.corridor, session.improved_role) {
        print!("{}", summary_table(&report));
    }
    for o in outcomes.iter().filter(|o| o.is_aborted()) {
        let a = o.aborted.as_ref().expect("filtered");
        eprintln!("run {} aborted in round {}: {}", o.run_index, a.round_index + 1, a.error);
    }
    println!("log: {}", log_path.display());
    let aborted = outcomes.iter().filter(|o| o.is_aborted()).count();
    if aborted > 0 {
        return Err(CliError::Aborted {
            aborted,
            runs: outcomes.len(),
        });
    }
    Ok(RunResult { log_path, outcomes })
}
