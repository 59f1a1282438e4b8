//! `haggle replay`: re-execute stored games and check them against the log.
//!
//! Each game is replayed from its stored turns under the rule-based
//! moderator. When every engine in the session is scripted the whole run is
//! also re-simulated from the header, which catches edits to the stored
//! text that a pure replay would faithfully reproduce.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use haggle_core::agents::ReplayAgent;
use haggle_core::moderator::OracleModerator;
use haggle_core::session::{run_single, StandardBackends};
use haggle_core::{run_game, EngineFamily, FeedbackMode, GameState, RoundMeta, RoundRecord, RunOutcome, Utterance};

use crate::transcript::{read_log_file, single_session, LoggedSession};
use crate::{CliError, ReplayArgs, SharedArgs};

/// First difference between two records, described for a human.
pub fn first_difference(stored: &RoundRecord, replayed: &RoundRecord) -> Option<String> {
    let n = stored.transcript.len().max(replayed.transcript.len());
    for i in 0..n {
        let (a, b) = (stored.transcript.get(i), replayed.transcript.get(i));
        if a != b {
            return Some(format!(
                "utterance {i}: stored {}, replayed {}",
                describe(a),
                describe(b)
            ));
        }
    }
    if stored.terminal_state != replayed.terminal_state {
        return Some(format!(
            "terminal state: stored {}, replayed {}",
            stored.terminal_state, replayed.terminal_state
        ));
    }
    if stored.flags != replayed.flags {
        return Some(format!("flags: stored {:?}, replayed {:?}", stored.flags, replayed.flags));
    }
    if stored.feedback != replayed.feedback {
        return Some(format!(
            "feedback: stored {:?}, replayed {:?}",
            stored.feedback, replayed.feedback
        ));
    }
    if stored != replayed {
        return Some("record metadata differs".into());
    }
    None
}

fn describe(u: Option<&Utterance>) -> String {
    match u {
        Some(u) => format!("{}: {:?}", u.speaker, u.text),
        None => "nothing".into(),
    }
}

/// Plays `stored` back turn by turn under the oracle moderator.
pub fn replay_record(stored: &RoundRecord, session: &LoggedSession) -> Result<RoundRecord, String> {
    let game = &session.header.config.game;
    let (mut seller, mut buyer) = ReplayAgent::pair(&stored.transcript);
    let mut moderator = OracleModerator::with_window_cap(game.moderator_window);
    let meta = RoundMeta {
        round_index: stored.round_index,
        improved_role: stored.improved_role,
    };
    let mut record = run_game(&mut seller, &mut buyer, &mut moderator, game, meta).map_err(|e| {
        let at = e.partial_transcript().map_or(0, <[Utterance]>::len);
        format!("replay stopped after {at} utterances: {e}")
    })?;
    record.feedback = stored.feedback.clone();
    Ok(record)
}

/// True when the session can be re-simulated without any network engine.
pub fn fully_scripted(session: &LoggedSession) -> bool {
    let c = &session.header.config;
    let scripted = |e: &haggle_core::EngineId| e.family == EngineFamily::Scripted;
    scripted(&c.improved_engine)
        && scripted(&c.rival_engine)
        && scripted(&c.moderator_engine)
        && (c.feedback_mode != FeedbackMode::AiCritic || scripted(c.critic_engine()))
}

struct Simulator<'a> {
    session: &'a LoggedSession,
    backends: StandardBackends,
    cache: HashMap<u32, RunOutcome>,
}

impl<'a> Simulator<'a> {
    fn new(session: &'a LoggedSession) -> Self {
        let mut backends = StandardBackends::offline(session.header.scripted);
        backends.prompts = session.header.prompts.clone();
        backends.demo_bank = Arc::new(haggle_core::moderator::bank::default_bank());
        Simulator {
            session,
            backends,
            cache: HashMap::new(),
        }
    }

    fn record(&mut self, run_index: u32, round_index: u32) -> Option<&RoundRecord> {
        let config = &self.session.header.config;
        let backends = &self.backends;
        self.cache
            .entry(run_index)
            .or_insert_with(|| run_single(config, backends, run_index))
            .records
            .get(round_index as usize)
    }
}

fn render_dialog(record: &RoundRecord, run_index: u32) -> String {
    let mut out = format!("run {run_index}, round {}\n", record.round_index + 1);
    for u in &record.transcript {
        let _ = writeln!(out, "  {:>6}: {}", u.speaker.label(), u.text);
    }
    let _ = writeln!(out, "  => {}", outcome_text(&record.terminal_state));
    out
}

fn outcome_text(state: &GameState) -> String {
    state.to_string()
}

/// Checks one stored game; `Err` carries the divergence.
fn check(
    session: &LoggedSession,
    sim: &mut Option<Simulator<'_>>,
    run_index: u32,
    stored: &RoundRecord,
) -> Result<(), String> {
    let replayed = replay_record(stored, session)?;
    if let Some(diff) = first_difference(stored, &replayed) {
        return Err(format!("replay: {diff}"));
    }
    if let Some(sim) = sim {
        match sim.record(run_index, stored.round_index) {
            None => return Err("re-simulation: the run ends before this round".into()),
            Some(fresh) => {
                if let Some(diff) = first_difference(stored, fresh) {
                    return Err(format!("re-simulation: {diff}"));
                }
            }
        }
    }
    Ok(())
}

pub fn execute(_shared: &SharedArgs, args: &ReplayArgs) -> Result<(), CliError> {
    let session = single_session(read_log_file(&args.log).map_err(|e| CliError::Config(e.to_string()))?)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let targets: Vec<(u32, &RoundRecord)> = if args.all {
        session
            .runs
            .iter()
            .flat_map(|r| r.records.iter().map(move |rec| (r.run_index, rec)))
            .collect()
    } else {
        let (run, round) = (args.run.unwrap_or(0), args.round.unwrap_or(0));
        let rec = session.record(run, round).ok_or_else(|| {
            CliError::Config(format!(
                "no stored game for run {run}, round {round} (session has {} runs x {} rounds)",
                session.header.config.runs, session.header.config.rounds
            ))
        })?;
        vec![(run, rec)]
    };
    if targets.is_empty() {
        return Err(CliError::Config("log holds no games".into()));
    }
    if session.header.config.moderator_engine.family != EngineFamily::Scripted {
        eprintln!("note: the session used a chat-model moderator; replay judges turns with the rule-based one");
    }
    let mut sim = fully_scripted(&session).then(|| Simulator::new(&session));
    let mut failures = Vec::new();
    for (run_index, stored) in &targets {
        if !args.quiet {
            print!("{}", render_dialog(stored, *run_index));
        }
        if let Err(diff) = check(&session, &mut sim, *run_index, stored) {
            let msg = format!("run {run_index}, round {}: {diff}", stored.round_index);
            eprintln!("DIVERGED {msg}");
            failures.push(msg);
        }
    }
    println!("replayed {} game(s), {} diverged", targets.len(), failures.len());
    match failures.into_iter().next() {
        None => Ok(()),
        Some(first) => Err(CliError::Divergence(first)),
    }
}
