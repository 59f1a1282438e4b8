mod common;

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};

use common::{crossing, play_scripted};
use haggle_core::agents::{
    Agent, AgentSpec, BackendError, ChatBackend, ChatPlayer, ChatRequest, ChatResponse, ConcessionPolicy, EngineId,
    ScriptedChatBackend,
};
use haggle_core::game::{GameConfig, GameState, Role};
use haggle_core::moderator::{Moderator, OracleModerator};
use haggle_core::price::Price;
use haggle_core::session::context::{FEEDBACK_HEADER, ROUND_HEADER};
use haggle_core::session::{
    run_session, run_single, Backends, FeedbackMode, NullSink, RunInfo, ScriptedCritic, ScriptedSetup, ScriptedSide,
    SessionConfig, StandardBackends,
};

fn d(x: i64) -> Price {
    Price::from_dollars(x)
}

fn scripted_config(rounds: u32, runs: u32) -> SessionConfig {
    let mut cfg = SessionConfig::new(Role::Seller, EngineId::scripted());
    cfg.rival_engine = EngineId::scripted();
    cfg.moderator_engine = EngineId::scripted();
    cfg.rounds = rounds;
    cfg.runs = runs;
    cfg
}

/// Wraps a backend and records every request with the round it was made in.
struct Capture {
    inner: Arc<dyn ChatBackend>,
    round: Arc<AtomicU32>,
    seen: Mutex<Vec<(u32, ChatRequest)>>,
}

impl ChatBackend for Capture {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let round = self.round.load(Ordering::SeqCst);
        self.seen.lock().unwrap().push((round, request.clone()));
        self.inner.complete(request)
    }
}

/// Chat players over scripted policies, with every prompt captured.
struct Instrumented {
    round: Arc<AtomicU32>,
    improved: Arc<Capture>,
    rivals: Mutex<Vec<Arc<Capture>>>,
    critic: Arc<Capture>,
    buyer: ConcessionPolicy,
}

impl Instrumented {
    fn new() -> Self {
        let (seller, buyer) = common::canonical_policies();
        let round = Arc::new(AtomicU32::new(0));
        let capture = |inner: Arc<dyn ChatBackend>| {
            Arc::new(Capture {
                inner,
                round: round.clone(),
                seen: Mutex::new(Vec::new()),
            })
        };
        Instrumented {
            improved: capture(Arc::new(ScriptedChatBackend::new(Role::Seller, seller))),
            critic: capture(Arc::new(ScriptedCritic)),
            rivals: Mutex::new(Vec::new()),
            round,
            buyer,
        }
    }
}

impl Backends for Instrumented {
    fn improved_player(&self, _: &SessionConfig, _: &RunInfo) -> Result<Box<dyn Agent>, BackendError> {
        let spec = AgentSpec::new(Role::Seller, EngineId::scripted(), "You are the seller.");
        Ok(Box::new(ChatPlayer::new(spec, self.improved.clone())))
    }

    fn rival_player(&self, _: &SessionConfig, _: &RunInfo, round: u32) -> Result<Box<dyn Agent>, BackendError> {
        self.round.store(round, Ordering::SeqCst);
        let capture = Arc::new(Capture {
            inner: Arc::new(ScriptedChatBackend::new(Role::Buyer, self.buyer)),
            round: self.round.clone(),
            seen: Mutex::new(Vec::new()),
        });
        self.rivals.lock().unwrap().push(capture.clone());
        let spec = AgentSpec::new(Role::Buyer, EngineId::scripted(), "You are the buyer.");
        Ok(Box::new(ChatPlayer::new(spec, capture)))
    }

    fn critic(&self, _: &SessionConfig, _: &RunInfo) -> Result<Arc<dyn ChatBackend>, BackendError> {
        Ok(self.critic.clone())
    }

    fn moderator(&self, _: &SessionConfig, _: &RunInfo) -> Result<Box<dyn Moderator>, BackendError> {
        Ok(Box::new(OracleModerator::with_window_cap(4)))
    }
}

#[test]
fn improved_player_accumulates_context_while_rival_resets() {
    let backends = Instrumented::new();
    let cfg = scripted_config(5, 1);
    let out = run_session(&cfg, &backends, &NullSink).unwrap();
    assert!(!out[0].is_aborted());
    assert_eq!(out[0].records.len(), 5);

    let improved = backends.improved.seen.lock().unwrap();
    for k in 0..5u32 {
        let prompts: Vec<&ChatRequest> = improved.iter().filter(|(r, _)| *r == k).map(|(_, q)| q).collect();
        assert!(!prompts.is_empty(), "round {k}");
        for p in prompts {
            assert_eq!(p.system_prompt.matches(ROUND_HEADER).count(), k as usize, "round {k}");
            assert_eq!(p.system_prompt.matches(FEEDBACK_HEADER).count(), k as usize, "round {k}");
        }
    }

    let rivals = backends.rivals.lock().unwrap();
    assert_eq!(rivals.len(), 5);
    for (k, rival) in rivals.iter().enumerate() {
        let record = &out[0].records[k];
        for (_, p) in rival.seen.lock().unwrap().iter() {
            assert_eq!(p.system_prompt, "You are the buyer.");
            assert!(!p.messages.iter().any(|m| m.text.contains(ROUND_HEADER)));
            // Exactly the current game so far: openers plus this round's turns.
            let texts: Vec<&str> = p.messages.iter().map(|m| m.text.as_str()).collect();
            let prefix: Vec<&str> = record.transcript[..texts.len()].iter().map(|u| u.text.as_str()).collect();
            assert_eq!(texts, prefix);
        }
    }

    // The critic sees every earlier round and all feedback already given.
    let critic = backends.critic.seen.lock().unwrap();
    assert_eq!(critic.len(), 4);
    for (i, (_, req)) in critic.iter().enumerate() {
        let text = &req.messages[0].text;
        assert_eq!(text.matches(ROUND_HEADER).count(), i + 1);
        assert_eq!(text.matches(FEEDBACK_HEADER).count(), i);
    }
}

#[test]
fn feedback_recorded_after_every_non_final_round() {
    let backends = Instrumented::new();
    let out = run_session(&scripted_config(4, 1), &backends, &NullSink).unwrap();
    let fb: Vec<Option<usize>> = out[0].records.iter().map(|r| r.feedback.as_ref().map(Vec::len)).collect();
    assert_eq!(fb, [Some(3), Some(3), Some(3), None]);
}

#[test]
fn single_round_without_feedback_equals_plain_game() {
    let mut cfg = scripted_config(1, 3);
    cfg.feedback_mode = FeedbackMode::None;
    let backends = StandardBackends::offline(ScriptedSetup::default());
    let out = run_session(&cfg, &backends, &NullSink).unwrap();
    let (s, b) = common::canonical_policies();
    let mut plain = play_scripted(&GameConfig::default(), s, b);
    plain.improved_role = Role::Seller;
    for run in &out {
        assert_eq!(run.records, [plain.clone()]);
    }
}

#[test]
fn reserve_shift_raises_second_round_price() {
    let seller = ScriptedSide {
        reserve: d(16),
        concession: d(2),
        reserve_jitter: Price::ZERO,
        shift_per_feedback: d(1),
    };
    let setup = ScriptedSetup {
        seller,
        buyer: ScriptedSide::buyer_default(),
    };
    let backends = StandardBackends::offline(setup);
    let out = run_session(&scripted_config(2, 1), &backends, &NullSink).unwrap();
    let prices: Vec<Price> = out[0].records.iter().map(|r| r.deal_price().unwrap()).collect();

    let cap = GameConfig::default().max_exchanges;
    let buyer = ConcessionPolicy::buyer(d(10), d(18), Price::from_cents(150)).unwrap();
    let expect = |reserve| {
        crossing(&ConcessionPolicy::seller(d(20), reserve, d(2)).unwrap(), &buyer, cap)
            .state
            .deal_price()
            .unwrap()
    };
    assert_eq!(prices, [expect(d(16)), expect(d(17))]);
    assert!(prices[1] > prices[0]);
}

#[test]
fn human_pool_feedback_comes_from_pool() {
    let mut cfg = scripted_config(3, 2);
    cfg.feedback_mode = FeedbackMode::default_human_pool();
    let backends = StandardBackends::offline(ScriptedSetup::default());
    let out = run_session(&cfg, &backends, &NullSink).unwrap();
    let pool = haggle_core::session::default_human_pool();
    for run in &out {
        for rec in &run.records[..2] {
            let fb = rec.feedback.as_ref().unwrap();
            assert_eq!(fb.len(), 3);
            assert!(fb.iter().all(|s| pool.contains(s)));
        }
    }
}

fn jittered_backends() -> StandardBackends {
    let mut setup = ScriptedSetup::default();
    setup.seller.shift_per_feedback = Price::from_cents(150);
    setup.buyer.reserve = d(16);
    setup.buyer.reserve_jitter = d(3);
    StandardBackends::offline(setup)
}

#[test]
fn runs_are_independent_of_order_and_parallelism() {
    let backends = jittered_backends();
    let mut cfg = scripted_config(3, 24);
    cfg.feedback_mode = FeedbackMode::default_human_pool();
    cfg.seed = 99;
    let serial = run_session(&cfg, &backends, &NullSink).unwrap();
    cfg.parallelism = 4;
    let parallel = run_session(&cfg, &backends, &NullSink).unwrap();
    assert_eq!(serial, parallel);
    let reversed: Vec<_> = (0..cfg.runs).rev().map(|i| run_single(&cfg, &backends, i)).collect();
    for r in reversed {
        assert_eq!(r, serial[r.run_index as usize]);
    }
    // Jitter makes runs differ from each other.
    assert!(serial.iter().any(|r| r.records != serial[0].records));
}

/// Fails the rival of one chosen run from a chosen round on.
struct Flaky {
    inner: StandardBackends,
    run: u32,
    round: u32,
}

impl Backends for Flaky {
    fn improved_player(&self, c: &SessionConfig, r: &RunInfo) -> Result<Box<dyn Agent>, BackendError> {
        self.inner.improved_player(c, r)
    }
    fn rival_player(&self, c: &SessionConfig, r: &RunInfo, round: u32) -> Result<Box<dyn Agent>, BackendError> {
        if r.run_index == self.run && round >= self.round {
            return Err(BackendError::Exhausted {
                provider: "gpt",
                attempts: 5,
                detail: "status 503".into(),
            });
        }
        self.inner.rival_player(c, r, round)
    }
    fn critic(&self, c: &SessionConfig, r: &RunInfo) -> Result<Arc<dyn ChatBackend>, BackendError> {
        self.inner.critic(c, r)
    }
    fn moderator(&self, c: &SessionConfig, r: &RunInfo) -> Result<Box<dyn Moderator>, BackendError> {
        self.inner.moderator(c, r)
    }
}

#[test]
fn backend_exhaustion_aborts_only_that_run() {
    let backends = Flaky {
        inner: StandardBackends::offline(ScriptedSetup::default()),
        run: 1,
        round: 1,
    };
    let out = run_session(&scripted_config(3, 3), &backends, &NullSink).unwrap();
    assert!(!out[0].is_aborted() && !out[2].is_aborted());
    assert_eq!(out[0].records.len(), 3);
    let abort = out[1].aborted.as_ref().unwrap();
    assert_eq!(abort.round_index, 1);
    assert!(abort.error.contains("5 attempts"), "{}", abort.error);
    assert_eq!(out[1].records.len(), 1);
}

#[test]
fn critic_format_error_keeps_raw_text() {
    struct TwoItems;
    impl ChatBackend for TwoItems {
        fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, BackendError> {
            Ok(ChatResponse::new("1. Be bold. 2. Be brief."))
        }
    }
    struct BadCritic(StandardBackends);
    impl Backends for BadCritic {
        fn improved_player(&self, c: &SessionConfig, r: &RunInfo) -> Result<Box<dyn Agent>, BackendError> {
            self.0.improved_player(c, r)
        }
        fn rival_player(&self, c: &SessionConfig, r: &RunInfo, k: u32) -> Result<Box<dyn Agent>, BackendError> {
            self.0.rival_player(c, r, k)
        }
        fn critic(&self, _: &SessionConfig, _: &RunInfo) -> Result<Arc<dyn ChatBackend>, BackendError> {
            Ok(Arc::new(TwoItems))
        }
        fn moderator(&self, c: &SessionConfig, r: &RunInfo) -> Result<Box<dyn Moderator>, BackendError> {
            self.0.moderator(c, r)
        }
    }
    let out = run_session(
        &scripted_config(2, 1),
        &BadCritic(StandardBackends::offline(ScriptedSetup::default())),
        &NullSink,
    )
    .unwrap();
    let abort = out[0].aborted.as_ref().unwrap();
    assert!(abort.error.contains("1. Be bold. 2. Be brief."), "{}", abort.error);
    assert_eq!(abort.partial_transcript.len(), 10);
}

#[test]
fn no_deal_rounds_also_get_feedback() {
    let mut setup = ScriptedSetup::default();
    setup.seller.reserve = d(19);
    let backends = StandardBackends::offline(setup);
    let out = run_session(&scripted_config(2, 1), &backends, &NullSink).unwrap();
    let first = &out[0].records[0];
    assert!(matches!(first.terminal_state, GameState::NoDeal { .. }));
    assert_eq!(first.feedback.as_ref().map(Vec::len), Some(3));
}
