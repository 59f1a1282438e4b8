//! Fixed-point currency amounts, the price corridor, and the currency grammar
//! used to pull price mentions out of free text.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A currency amount stored as whole cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Price(i64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PriceError {
    #[error("not a currency amount: {0:?}")]
    Malformed(String),
    #[error("amount out of range: {0:?}")]
    Overflow(String),
}

impl Price {
    pub const ZERO: Price = Price(0);

    pub const fn from_cents(cents: i64) -> Self {
        Price(cents)
    }

    pub const fn from_dollars(dollars: i64) -> Self {
        Price(dollars * 100)
    }

    pub const fn cents(self) -> i64 {
        self.0
    }

    /// Rounds a floating amount to the nearest cent.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() || value.abs() > 1e15 {
            return None;
        }
        Some(Price((value * 100.0).round() as i64))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Renders with the symbol, dropping a `.00` fraction ("$20", "$12.50").
    pub fn compact(self, symbol: &str) -> String {
        if self.0 % 100 == 0 {
            format!("{symbol}{}", self.0 / 100)
        } else {
            format!("{symbol}{self}")
        }
    }

    /// Renders with the symbol and two decimals ("$16.00").
    pub fn with_symbol(self, symbol: &str) -> String {
        format!("{symbol}{self}")
    }

    /// Arithmetic mean rounded half away from zero to the cent.
    pub fn mean(prices: &[Price]) -> Option<Price> {
        if prices.is_empty() {
            return None;
        }
        let sum: i128 = prices.iter().map(|p| p.0 as i128).sum();
        let n = prices.len() as i128;
        let q = sum / n;
        let r = sum % n;
        let rounded = if 2 * r.abs() >= n { q + sum.signum() } else { q };
        Some(Price(rounded as i64))
    }

    /// Signed rendering used for deltas: "+0.77", "-1.20", "+0.00".
    pub fn signed(self) -> String {
        if self.0 < 0 {
            format!("-{}", Price(-self.0))
        } else {
            format!("+{self}")
        }
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl FromStr for Price {
    type Err = PriceError;

    /// Accepts `16`, `16.5`, `16.50`, `-3.25`; at most two fraction digits.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        let digits = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit());
        if !digits(whole) || (body.contains('.') && !digits(frac)) || frac.len() > 2 {
            return Err(PriceError::Malformed(s.to_string()));
        }
        let whole: i64 = whole
            .parse()
            .map_err(|_| PriceError::Overflow(s.to_string()))?;
        let frac_cents = match frac.len() {
            0 => 0,
            1 => frac.parse::<i64>().unwrap() * 10,
            _ => frac.parse::<i64>().unwrap(),
        };
        let cents = whole
            .checked_mul(100)
            .and_then(|c| c.checked_add(frac_cents))
            .ok_or_else(|| PriceError::Overflow(s.to_string()))?;
        Ok(Price(if neg { -cents } else { cents }))
    }
}

impl Add for Price {
    type Output = Price;
    fn add(self, rhs: Price) -> Price {
        Price(self.0 + rhs.0)
    }
}

impl Sub for Price {
    type Output = Price;
    fn sub(self, rhs: Price) -> Price {
        Price(self.0 - rhs.0)
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(i) => i
                .checked_mul(100)
                .map(Price)
                .ok_or_else(|| serde::de::Error::custom("amount out of range")),
            Raw::Float(f) => {
                Price::from_f64(f).ok_or_else(|| serde::de::Error::custom("amount out of range"))
            }
        }
    }
}

/// The band deals are expected to land in, fixed by the opening moves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceCorridor {
    pub floor: Price,
    pub ceiling: Price,
    #[serde(default = "default_symbol")]
    pub currency_symbol: String,
}

fn default_symbol() -> String {
    "$".to_string()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorridorError {
    #[error("corridor floor {floor} must be below ceiling {ceiling}")]
    Inverted { floor: Price, ceiling: Price },
    #[error("corridor bounds must be strictly positive (floor {0})")]
    NonPositive(Price),
    #[error("currency symbol must not be empty")]
    EmptySymbol,
}

impl Default for PriceCorridor {
    fn default() -> Self {
        PriceCorridor {
            floor: Price::from_dollars(10),
            ceiling: Price::from_dollars(20),
            currency_symbol: default_symbol(),
        }
    }
}

impl PriceCorridor {
    pub fn new(floor: Price, ceiling: Price) -> Result<Self, CorridorError> {
        let c = PriceCorridor {
            floor,
            ceiling,
            currency_symbol: default_symbol(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CorridorError> {
        if self.floor.cents() <= 0 {
            return Err(CorridorError::NonPositive(self.floor));
        }
        if self.floor >= self.ceiling {
            return Err(CorridorError::Inverted {
                floor: self.floor,
                ceiling: self.ceiling,
            });
        }
        if self.currency_symbol.is_empty() {
            return Err(CorridorError::EmptySymbol);
        }
        Ok(())
    }

    pub fn contains(&self, price: Price) -> bool {
        self.floor <= price && price <= self.ceiling
    }

    pub fn width(&self) -> Price {
        self.ceiling - self.floor
    }
}

/// A currency mention located in a piece of text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mention {
    pub amount: Price,
    /// Byte offsets into the scanned text.
    pub start: usize,
    pub end: usize,
}

/// Recognizes `<symbol><digits>[.<1-2 digits>]` and `<digits>[.<1-2 digits>] dollar(s)`.
/// Spelled-out numbers are not recognized.
#[derive(Debug, Clone)]
pub struct PriceGrammar {
    pattern: Regex,
}

static DOLLAR_GRAMMAR: Lazy<PriceGrammar> = Lazy::new(|| PriceGrammar::new("$"));

impl PriceGrammar {
    pub fn new(symbol: &str) -> Self {
        let sym = regex::escape(symbol);
        let pattern = format!(
            r"(?i){sym}\s?(?P<a>\d{{1,12}})(?:\.(?P<af>\d{{1,2}}))?\b|\b(?P<b>\d{{1,12}})(?:\.(?P<bf>\d{{1,2}}))?\s*dollars?\b"
        );
        PriceGrammar {
            pattern: Regex::new(&pattern).expect("price grammar compiles"),
        }
    }

    /// The grammar for the `$` symbol.
    pub fn dollars() -> &'static PriceGrammar {
        &DOLLAR_GRAMMAR
    }

    pub fn mentions(&self, text: &str) -> Vec<Mention> {
        self.pattern
            .captures_iter(text)
            .filter_map(|caps| {
                let whole = caps.get(0)?;
                let (int, frac) = match caps.name("a") {
                    Some(a) => (a.as_str(), caps.name("af").map(|m| m.as_str())),
                    None => (caps.name("b")?.as_str(), caps.name("bf").map(|m| m.as_str())),
                };
                let literal = match frac {
                    Some(f) => format!("{int}.{f}"),
                    None => int.to_string(),
                };
                let amount = literal.parse().ok()?;
                Some(Mention {
                    amount,
                    start: whole.start(),
                    end: whole.end(),
                })
            })
            .collect()
    }
}
