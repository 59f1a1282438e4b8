mod common;

use common::{canonical_policies, crossing, play_scripted, random_setup};
use haggle_core::agents::scripted::REFUSAL_SENTENCE;
use haggle_core::agents::{ConcessionPolicy, ScriptedAgent};
use haggle_core::game::{run_game, GameConfig, GameState, Role, RoundMeta, Utterance};
use haggle_core::moderator::bank::default_bank;
use haggle_core::moderator::{oracle_classify, FewShotModerator, Moderator, ModeratorError, OracleBackend};
use haggle_core::price::Price;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[test]
fn canonical_game_deals_at_sixteen_on_exchange_four() {
    let (s, b) = canonical_policies();
    let cfg = GameConfig::default();
    let oracle = crossing(&s, &b, cfg.max_exchanges);
    assert_eq!(oracle.state, GameState::deal(Price::from_dollars(16)));
    let rec = play_scripted(&cfg, s, b);
    let texts: Vec<&str> = rec.transcript.iter().map(|u| u.text.as_str()).collect();
    assert_eq!(
        texts,
        [
            "This is a good balloon and its price is $20.",
            "Would you consider selling it for $10?",
            "How about $19.00?",
            "How about $11.50?",
            "How about $18.00?",
            "How about $13.00?",
            "How about $17.00?",
            "How about $14.50?",
            "How about $16.00?",
            "I accept your offer of $16.00.",
        ]
    );
    assert_eq!(rec.terminal_state, oracle.state);
    assert_eq!(rec.transcript.len() as u32, oracle.exchanges + 2);
}

#[test]
fn run_game_matches_closed_form_crossing() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut deals = 0;
    for case in 0..2_000 {
        let (cfg, s, b) = random_setup(&mut rng);
        let expected = crossing(&s, &b, cfg.max_exchanges);
        let rec = play_scripted(&cfg, s, b);
        assert_eq!(rec.terminal_state, expected.state, "case {case}: {s:?} {b:?} {cfg:?}");
        assert_eq!(rec.transcript.len() as u32, expected.exchanges + 2, "case {case}");
        deals += rec.terminal_state.is_deal() as u32;
    }
    // Both branches must be exercised for the comparison to mean anything.
    assert!(deals > 200 && deals < 1_800, "deals {deals}");
}

#[test]
fn deal_feasible_iff_reserves_overlap_given_enough_turns() {
    let cfg = GameConfig {
        max_exchanges: 1_000,
        ..GameConfig::default()
    };
    let grid: Vec<i64> = (0..=20).map(|i| 1_000 + 50 * i).collect();
    for &rs in &grid {
        for &rb in &grid {
            for (cs, cb) in [(50, 50), (100, 150), (200, 75)] {
                let s = ConcessionPolicy::seller(Price::from_dollars(20), Price::from_cents(rs), Price::from_cents(cs)).unwrap();
                let b = ConcessionPolicy::buyer(Price::from_dollars(10), Price::from_cents(rb), Price::from_cents(cb)).unwrap();
                let rec = play_scripted(&cfg, s, b);
                assert_eq!(rec.terminal_state.is_deal(), rb >= rs, "rs {rs} rb {rb}");
                if let Some(p) = rec.deal_price() {
                    assert!(p.cents() >= rs && p.cents() <= rb, "price {p} outside [{rs}, {rb}]");
                }
            }
        }
    }
}

#[test]
fn protocol_moderators_agree_at_every_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bank = Arc::new(default_bank());
    for _ in 0..300 {
        let (cfg, s, b) = random_setup(&mut rng);
        let rec = play_scripted(&cfg, s, b);
        let mut few_shot = FewShotModerator::new(bank.clone(), Arc::new(OracleBackend), cfg.moderator_window);
        for end in 3..=rec.transcript.len() {
            let start = end.saturating_sub(cfg.moderator_window);
            let window = &rec.transcript[start..end];
            let truth = if end == rec.transcript.len() && rec.terminal_state.is_deal() {
                rec.terminal_state
            } else {
                GameState::OnGoing
            };
            assert_eq!(oracle_classify(window), truth);
            assert_eq!(few_shot.classify(window).unwrap(), truth);
        }
    }
}

#[test]
fn refusal_sentence_ends_game_without_deal() {
    struct Refuser;
    impl haggle_core::agents::Agent for Refuser {
        fn role(&self) -> Role {
            Role::Buyer
        }
        fn respond(&mut self, _: &[Utterance]) -> Result<String, haggle_core::agents::AgentError> {
            Ok(REFUSAL_SENTENCE.to_string())
        }
    }
    let (s, _) = canonical_policies();
    let mut seller = ScriptedAgent::new(Role::Seller, s);
    let mut m = haggle_core::moderator::OracleModerator::default();
    let rec = run_game(&mut seller, &mut Refuser, &mut m, &GameConfig::default(), RoundMeta::default()).unwrap();
    assert_eq!(rec.transcript.len(), 4);
    assert!(matches!(rec.terminal_state, GameState::NoDeal { .. }));
}

/// Records every window it is shown and delegates to the oracle.
struct Recording {
    windows: Vec<Vec<Utterance>>,
}

impl Moderator for Recording {
    fn classify(&mut self, window: &[Utterance]) -> Result<GameState, ModeratorError> {
        self.windows.push(window.to_vec());
        Ok(oracle_classify(window))
    }
}

fn policy_strategy() -> impl Strategy<Value = (u64, u32)> {
    (any::<u64>(), 1u32..=8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn speakers_alternate_and_games_terminate((seed, _) in policy_strategy()) {
        let (cfg, s, b) = random_setup(&mut ChaCha8Rng::seed_from_u64(seed));
        let rec = play_scripted(&cfg, s, b);
        for (i, u) in rec.transcript.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::Seller } else { Role::Buyer };
            prop_assert_eq!(u.speaker, expected);
            prop_assert_eq!(u.turn_index as usize, i);
        }
        prop_assert!(rec.terminal_state.is_terminal());
        prop_assert!(rec.transcript.len() as u32 <= cfg.max_exchanges + 2);
    }

    #[test]
    fn scripted_games_are_deterministic((seed, _) in policy_strategy()) {
        let (cfg, s, b) = random_setup(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(play_scripted(&cfg, s, b), play_scripted(&cfg, s, b));
    }

    #[test]
    fn moderator_sees_only_trailing_window((seed, window) in policy_strategy()) {
        let (mut cfg, s, b) = random_setup(&mut ChaCha8Rng::seed_from_u64(seed));
        cfg.moderator_window = window as usize;
        let mut seller = ScriptedAgent::new(Role::Seller, s);
        let mut buyer = ScriptedAgent::new(Role::Buyer, b);
        let mut m = Recording { windows: Vec::new() };
        let rec = run_game(&mut seller, &mut buyer, &mut m, &cfg, RoundMeta::default()).unwrap();
        prop_assert_eq!(m.windows.len(), rec.transcript.len() - 2);
        for (k, w) in m.windows.iter().enumerate() {
            let end = k + 3;
            let start = end.saturating_sub(cfg.moderator_window);
            prop_assert!(w.len() <= cfg.moderator_window);
            prop_assert_eq!(w.as_slice(), &rec.transcript[start..end]);
        }
    }

    #[test]
    fn scripted_quotes_are_monotone_within_reserve((seed, _) in policy_strategy()) {
        let (cfg, s, b) = random_setup(&mut ChaCha8Rng::seed_from_u64(seed));
        let rec = play_scripted(&cfg, s, b);
        let quotes = |role: Role| -> Vec<Price> {
            rec.generated_by(role)
                .filter(|u| u.text.starts_with("How about"))
                .map(|u| haggle_core::agents::scripted::standing_price(&u.text, "$").unwrap())
                .collect()
        };
        let sq = quotes(Role::Seller);
        let bq = quotes(Role::Buyer);
        prop_assert!(sq.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(bq.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(sq.iter().all(|p| *p >= s.reserve && *p <= s.opening));
        prop_assert!(bq.iter().all(|p| *p <= b.reserve && *p >= b.opening));
    }
}
