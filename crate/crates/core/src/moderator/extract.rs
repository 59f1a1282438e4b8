use crate::game::Utterance;
use crate::price::{Price, PriceGrammar};

/// A currency amount found in a dialog window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriceMention {
    pub amount: Price,
    /// Position of the utterance within the scanned window.
    pub utterance_index: usize,
    /// Byte offsets into that utterance's text.
    pub span: (usize, usize),
}

/// Reads the deal price off a window whose last utterance is the accepting
/// one: the last mention in that utterance if any, otherwise the latest
/// mention by the other speaker.
pub fn extract_price(window: &[Utterance]) -> Option<PriceMention> {
    extract_price_with(window, PriceGrammar::dollars())
}

pub fn extract_price_with(window: &[Utterance], grammar: &PriceGrammar) -> Option<PriceMention> {
    let (last_index, accepting) = window.iter().enumerate().last()?;
    let last_mention = |idx: usize, u: &Utterance| {
        grammar.mentions(&u.text).last().map(|m| PriceMention {
            amount: m.amount,
            utterance_index: idx,
            span: (m.start, m.end),
        })
    };
    if let Some(found) = last_mention(last_index, accepting) {
        return Some(found);
    }
    window[..last_index]
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, u)| u.speaker != accepting.speaker)
        .find_map(|(i, u)| last_mention(i, u))
}

/// Scans a single utterance.
pub fn extract_price_from_text(text: &str) -> Option<Price> {
    PriceGrammar::dollars().mentions(text).last().map(|m| m.amount)
}
