//! Per-round aggregates over finished sessions: mean deal price, success
//! rate, price histograms and response lengths.
//!
//! Prices are averaged in integer cents, so every figure here can be
//! recomputed exactly from raw transcripts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameState, Role, RoundRecord};
use crate::price::{Price, PriceCorridor};
use crate::session::RunOutcome;

pub const BIN_COUNT: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no round records to aggregate")]
    Empty,
}

/// Deal prices binned over the corridor. Prices outside it, and deals whose
/// price could not be read, are counted separately so the total always
/// equals the number of deals.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: [usize; BIN_COUNT],
    pub underflow: usize,
    pub overflow: usize,
    pub unpriced: usize,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().sum::<usize>() + self.underflow + self.overflow + self.unpriced
    }

    /// Lower edge of bin `i`.
    pub fn lower_edge(corridor: &PriceCorridor, i: usize) -> Price {
        let width = corridor.width().cents();
        Price::from_cents(corridor.floor.cents() + width * i as i64 / BIN_COUNT as i64)
    }
}

pub enum Bin {
    Index(usize),
    Underflow,
    Overflow,
}

/// Equal-width bins, left-closed and right-open except the top bin, which
/// also takes the ceiling.
pub fn bin_of(price: Price, corridor: &PriceCorridor) -> Bin {
    if price < corridor.floor {
        return Bin::Underflow;
    }
    if price > corridor.ceiling {
        return Bin::Overflow;
    }
    let offset = (price - corridor.floor).cents() as i128;
    let width = corridor.width().cents() as i128;
    let idx = (offset * BIN_COUNT as i128 / width) as usize;
    Bin::Index(idx.min(BIN_COUNT - 1))
}

pub fn bin_prices(prices: impl IntoIterator<Item = Price>, corridor: &PriceCorridor) -> Histogram {
    let mut h = Histogram::default();
    for p in prices {
        match bin_of(p, corridor) {
            Bin::Index(i) => h.bins[i] += 1,
            Bin::Underflow => h.underflow += 1,
            Bin::Overflow => h.overflow += 1,
        }
    }
    h
}

/// What a failed game contributes to the mean price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoDealPricing {
    /// Means are over deals only.
    #[default]
    Exclude,
    /// Each NO DEAL game counts as a deal at this price.
    Impute(Price),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round_index: u32,
    /// Games played in this round (runs that reached it).
    pub games: usize,
    pub deals: usize,
    pub success_rate: f64,
    /// Mean over deals with a readable price, plus imputed failures when
    /// asked for.
    pub mean_deal_price: Option<Price>,
    pub mean_response_length: Option<f64>,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub rounds: Vec<RoundSummary>,
    /// Second-round mean minus first-round mean.
    pub improvement_delta: Option<Price>,
    pub run_count: usize,
    pub aborted_run_count: usize,
}

impl SessionReport {
    pub fn mean_price_curve(&self) -> Vec<Option<Price>> {
        self.rounds.iter().map(|r| r.mean_deal_price).collect()
    }

    pub fn success_rate_curve(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.success_rate).collect()
    }

    /// `mean_deal_price` of round `i` minus that of round 0.
    pub fn delta_vs_first(&self, i: usize) -> Option<Price> {
        let first = self.rounds.first()?.mean_deal_price?;
        Some(self.rounds.get(i)?.mean_deal_price? - first)
    }
}

fn by_round(runs: &[RunOutcome]) -> Vec<Vec<&RoundRecord>> {
    let n = runs
        .iter()
        .flat_map(|r| r.records.iter().map(|rec| rec.round_index as usize + 1))
        .max()
        .unwrap_or(0);
    let mut rounds: Vec<Vec<&RoundRecord>> = vec![Vec::new(); n];
    for run in runs {
        for rec in &run.records {
            rounds[rec.round_index as usize].push(rec);
        }
    }
    rounds
}

fn mean_length<'a>(records: impl IntoIterator<Item = &'a RoundRecord>, role: Role) -> Option<f64> {
    let (sum, count) = records
        .into_iter()
        .flat_map(|r| r.generated_by(role))
        .fold((0u64, 0u64), |(s, c), u| (s + u.char_length as u64, c + 1));
    (count > 0).then(|| sum as f64 / count as f64)
}

/// Mean character count of `role`'s generated utterances per round.
/// Rounds where the role said nothing beyond its opener are `None`.
pub fn response_length_curve(runs: &[RunOutcome], role: Role) -> Vec<Option<f64>> {
    by_round(runs)
        .into_iter()
        .map(|recs| mean_length(recs, role))
        .collect()
}

/// `length_role` selects whose utterances are measured, normally the
/// improved player. Mean prices count deals only.
pub fn aggregate(
    runs: &[RunOutcome],
    corridor: &PriceCorridor,
    length_role: Role,
) -> Result<SessionReport, MetricsError> {
    aggregate_with(runs, corridor, length_role, NoDealPricing::Exclude)
}

pub fn aggregate_with(
    runs: &[RunOutcome],
    corridor: &PriceCorridor,
    length_role: Role,
    no_deal: NoDealPricing,
) -> Result<SessionReport, MetricsError> {
    let grouped = by_round(runs);
    if grouped.is_empty() {
        return Err(MetricsError::Empty);
    }
    let rounds: Vec<RoundSummary> = grouped
        .into_iter()
        .enumerate()
        .map(|(i, recs)| {
            let deal_states: Vec<GameState> = recs
                .iter()
                .map(|r| r.terminal_state)
                .filter(GameState::is_deal)
                .collect();
            let prices: Vec<Price> = deal_states.iter().filter_map(GameState::deal_price).collect();
            let mut histogram = bin_prices(prices.iter().copied(), corridor);
            histogram.unpriced = deal_states.len() - prices.len();
            let mut priced = prices;
            if let NoDealPricing::Impute(p) = no_deal {
                priced.extend(recs.iter().filter(|r| !r.terminal_state.is_deal()).map(|_| p));
            }
            RoundSummary {
                round_index: i as u32,
                games: recs.len(),
                deals: deal_states.len(),
                success_rate: if recs.is_empty() {
                    0.0
                } else {
                    deal_states.len() as f64 / recs.len() as f64
                },
                mean_deal_price: Price::mean(&priced),
                mean_response_length: mean_length(recs.iter().copied(), length_role),
                histogram,
            }
        })
        .collect();
    let improvement_delta = match (rounds.first(), rounds.get(1)) {
        (Some(a), Some(b)) => b.mean_deal_price.zip(a.mean_deal_price).map(|(b, a)| b - a),
        _ => None,
    };
    Ok(SessionReport {
        rounds,
        improvement_delta,
        run_count: runs.len(),
        aborted_run_count: runs.iter().filter(|r| r.is_aborted()).count(),
    })
}
