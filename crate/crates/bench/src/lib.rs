//! Fixtures for the benchmarks under `benches/`.

use haggle_core::agents::ConcessionPolicy;
use haggle_core::session::{ScriptedSetup, StandardBackends};
use haggle_core::{EngineId, Price, Role, SessionConfig};

/// The canonical pair: seller 20 -> 12 by 1.00, buyer 10 -> 18 by 1.50.
pub fn canonical_policies() -> (ConcessionPolicy, ConcessionPolicy) {
    let d = Price::from_dollars;
    (
        ConcessionPolicy::seller(d(20), d(12), d(1)).expect("valid seller"),
        ConcessionPolicy::buyer(d(10), d(18), Price::from_cents(150)).expect("valid buyer"),
    )
}

/// An all-scripted session with an escalating seller and jittered buyers.
pub fn scripted_session(runs: u32, rounds: u32, parallelism: usize) -> (SessionConfig, StandardBackends) {
    let mut cfg = SessionConfig::new(Role::Seller, EngineId::scripted());
    cfg.rival_engine = EngineId::scripted();
    cfg.moderator_engine = EngineId::scripted();
    cfg.runs = runs;
    cfg.rounds = rounds;
    cfg.parallelism = parallelism;
    cfg.seed = 2024;
    let mut setup = ScriptedSetup::default();
    setup.seller.shift_per_feedback = Price::from_cents(150);
    setup.buyer.reserve = Price::from_dollars(16);
    setup.buyer.reserve_jitter = Price::from_dollars(3);
    (cfg, StandardBackends::offline(setup))
}
