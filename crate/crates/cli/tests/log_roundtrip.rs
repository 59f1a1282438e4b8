use haggle_cli::transcript::{read_log, single_session, LogWriter, SessionHeader};
use haggle_core::session::{OrderedSink, ScriptedSetup, StandardBackends};
use haggle_core::{run_session, EngineId, FeedbackMode, Price, Role, SessionConfig};
use proptest::prelude::*;

fn session(seed: u64, runs: u32, rounds: u32, role: Role, mode: u8, jitter: i64, parallelism: usize) -> (SessionConfig, ScriptedSetup) {
    let mut cfg = SessionConfig::new(role, EngineId::scripted());
    cfg.rival_engine = EngineId::scripted();
    cfg.moderator_engine = EngineId::scripted();
    cfg.seed = seed;
    cfg.runs = runs;
    cfg.rounds = rounds;
    cfg.parallelism = parallelism;
    cfg.feedback_mode = match mode {
        0 => FeedbackMode::AiCritic,
        1 => FeedbackMode::default_human_pool(),
        _ => FeedbackMode::None,
    };
    let mut setup = ScriptedSetup::default();
    setup.seller.reserve_jitter = Price::from_cents(jitter);
    setup.buyer.reserve_jitter = Price::from_cents(jitter * 2);
    setup.seller.shift_per_feedback = Price::from_cents(75);
    setup.buyer.shift_per_feedback = Price::from_cents(75);
    (cfg, setup)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Writing a session and reading it back gives the same outcomes, even
    /// with the record lines shuffled.
    #[test]
    fn log_round_trip(
        seed in any::<u64>(),
        runs in 1u32..6,
        rounds in 1u32..5,
        seller in any::<bool>(),
        mode in 0u8..3,
        jitter in 0i64..400,
        parallelism in 1usize..4,
        order in Just((0usize..64).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let role = if seller { Role::Seller } else { Role::Buyer };
        let (cfg, setup) = session(seed, runs, rounds, role, mode, jitter, parallelism);
        let backends = StandardBackends::offline(setup);
        let header = SessionHeader::new(cfg.clone(), setup, backends.prompts.clone(), backends.demo_bank.version);
        let sink = OrderedSink::new(LogWriter::new(Vec::new(), &header).unwrap());
        let outcomes = run_session(&cfg, &backends, &sink).unwrap();
        let bytes = sink.into_inner().into_inner();
        let text = String::from_utf8(bytes).unwrap();

        let back = single_session(read_log(text.as_bytes()).unwrap()).unwrap();
        prop_assert_eq!(&back.header, &header);
        prop_assert_eq!(&back.runs, &outcomes);

        let mut lines: Vec<&str> = text.lines().collect();
        let head = lines.remove(0);
        let mut shuffled: Vec<&str> = order.iter().filter(|&&i| i < lines.len()).map(|&i| lines[i]).collect();
        shuffled.insert(0, head);
        prop_assert_eq!(shuffled.len(), lines.len() + 1);
        let back = single_session(read_log(shuffled.join("\n").as_bytes()).unwrap()).unwrap();
        prop_assert_eq!(&back.runs, &outcomes);
    }
}
