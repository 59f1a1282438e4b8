//! Independent oracles shared by integration tests.
#![allow(dead_code)]

use haggle_core::agents::{ConcessionPolicy, ScriptedAgent};
use haggle_core::game::{run_game, GameConfig, GameState, NoDealReason, Role, RoundMeta, RoundRecord};
use haggle_core::moderator::OracleModerator;
use haggle_core::price::{Price, PriceCorridor};
use rand::Rng;

fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Outcome predicted without simulating the dialog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crossing {
    pub state: GameState,
    /// Generated utterances before the game ended.
    pub exchanges: u32,
}

/// First exchange at which either scripted side accepts, found from the
/// linear concession schedules by ceiling division.
///
/// Seller's t-th reply (t >= 1) is generated utterance 2t-2 and sees the
/// buyer's quote b(t-1); the buyer's t-th reply is utterance 2t-1 and sees
/// the seller's quote s(t).
pub fn crossing(seller: &ConcessionPolicy, buyer: &ConcessionPolicy, cap: u32) -> Crossing {
    let (os, rs, cs) = (seller.opening.cents(), seller.reserve.cents(), seller.concession.cents());
    let (ob, rb, cb) = (buyer.opening.cents(), buyer.reserve.cents(), buyer.concession.cents());
    let s = |t: i64| (os - t * cs).max(rs);
    let b = |t: i64| (ob + t * cb).min(rb);
    let turn_cap = Crossing {
        state: GameState::NoDeal { reason: NoDealReason::TurnCapReached },
        exchanges: cap,
    };
    if rb < rs {
        return turn_cap;
    }
    // b(t-1) >= s(t)
    let t_seller = [
        1,
        1 + ceil_div(rs - ob, cb),
        ceil_div(os - rb, cs),
        ceil_div(os - ob + cb, cs + cb),
    ]
    .into_iter()
    .max()
    .unwrap();
    // s(t) <= b(t)
    let t_buyer = [1, ceil_div(os - rb, cs), ceil_div(rs - ob, cb), ceil_div(os - ob, cs + cb)]
        .into_iter()
        .max()
        .unwrap();
    let k_seller = 2 * t_seller - 2;
    let k_buyer = 2 * t_buyer - 1;
    let (k, price) = if k_seller < k_buyer {
        (k_seller, b(t_seller - 1))
    } else {
        (k_buyer, s(t_buyer))
    };
    if k >= cap as i64 {
        return turn_cap;
    }
    Crossing {
        state: GameState::deal(Price::from_cents(price)),
        exchanges: k as u32 + 1,
    }
}

/// A random corridor and a valid policy pair opening at its bounds.
pub fn random_setup<R: Rng>(rng: &mut R) -> (GameConfig, ConcessionPolicy, ConcessionPolicy) {
    let floor = rng.random_range(100..=2_000i64);
    let ceiling = floor + rng.random_range(1..=3_000i64);
    let corridor = PriceCorridor::new(Price::from_cents(floor), Price::from_cents(ceiling)).unwrap();
    let config = GameConfig {
        corridor,
        max_exchanges: rng.random_range(1..=30),
        ..GameConfig::default()
    };
    let rs = rng.random_range(floor - 200..=ceiling).max(1);
    let rb = rng.random_range(floor..=ceiling + 200);
    let seller = ConcessionPolicy::seller(
        Price::from_cents(ceiling),
        Price::from_cents(rs),
        Price::from_cents(rng.random_range(1..=500)),
    )
    .unwrap();
    let buyer = ConcessionPolicy::buyer(
        Price::from_cents(floor),
        Price::from_cents(rb),
        Price::from_cents(rng.random_range(1..=500)),
    )
    .unwrap();
    (config, seller, buyer)
}

pub fn play_scripted(config: &GameConfig, seller: ConcessionPolicy, buyer: ConcessionPolicy) -> RoundRecord {
    let mut s = ScriptedAgent::new(Role::Seller, seller);
    let mut b = ScriptedAgent::new(Role::Buyer, buyer);
    let mut m = OracleModerator::with_window_cap(config.moderator_window);
    run_game(&mut s, &mut b, &mut m, config, RoundMeta::default()).expect("scripted game")
}

pub fn canonical_policies() -> (ConcessionPolicy, ConcessionPolicy) {
    let d = Price::from_dollars;
    (
        ConcessionPolicy::seller(d(20), d(12), d(1)).unwrap(),
        ConcessionPolicy::buyer(d(10), d(18), Price::from_cents(150)).unwrap(),
    )
}
