//! Exact rational quantities used for environment values, thresholds and
//! per-tick deltas.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational number.
///
/// Parsed from decimal literals (`27`, `-0.5`) or fractions (`1/3`) and printed
/// back in the shortest exact form: integers as integers, terminating decimals
/// as decimals, everything else as `p/q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Quantity(Rational64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid number `{0}`")]
pub struct QuantityParseError(pub String);

impl Quantity {
    pub const ZERO: Quantity = Quantity(Rational64::ZERO);

    pub fn new(numer: i64, denom: i64) -> Self {
        Quantity(Rational64::new(numer, denom))
    }

    pub fn from_integer(value: i64) -> Self {
        Quantity(Rational64::from_integer(value))
    }

    pub fn ratio(self) -> Rational64 {
        self.0
    }

    pub fn numer(self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(self) -> bool {
        self.0.is_integer()
    }

    pub fn signum(self) -> i64 {
        if self.is_positive() {
            1
        } else if self.is_negative() {
            -1
        } else {
            0
        }
    }

    /// Rounds to the nearest integer, halves away from zero.
    pub fn round(self) -> i64 {
        self.0.round().to_integer()
    }

    pub fn floor(self) -> i64 {
        self.0.floor().to_integer()
    }

    pub fn ceil(self) -> i64 {
        self.0.ceil().to_integer()
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    fn terminating_decimal(self) -> Option<String> {
        let mut denom = self.denom();
        let mut twos = 0u32;
        let mut fives = 0u32;
        while denom % 2 == 0 {
            denom /= 2;
            twos += 1;
        }
        while denom % 5 == 0 {
            denom /= 5;
            fives += 1;
        }
        if denom != 1 {
            return None;
        }
        let digits = twos.max(fives);
        let scale = 10i128.checked_pow(digits)?;
        let scaled = (self.numer() as i128).checked_mul(scale)? / self.denom() as i128;
        let negative = scaled < 0;
        let abs = scaled.unsigned_abs();
        let int_part = abs / scale as u128;
        let frac_part = abs % scale as u128;
        let mut out = String::new();
        if negative {
            out.push('-');
        }
        out.push_str(&int_part.to_string());
        if digits > 0 {
            let frac = format!("{:0width$}", frac_part, width = digits as usize);
            out.push('.');
            out.push_str(frac.trim_end_matches('0'));
        }
        Some(out)
    }
}

impl From<i64> for Quantity {
    fn from(value: i64) -> Self {
        Quantity::from_integer(value)
    }
}

impl From<Rational64> for Quantity {
    fn from(value: Rational64) -> Self {
        Quantity(value)
    }
}

impl std::ops::Add for Quantity {
    type Output = Quantity;
    fn add(self, rhs: Quantity) -> Quantity {
        Quantity(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Quantity {
    type Output = Quantity;
    fn sub(self, rhs: Quantity) -> Quantity {
        Quantity(self.0 - rhs.0)
    }
}

impl std::ops::Mul for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: Quantity) -> Quantity {
        Quantity(self.0 * rhs.0)
    }
}

impl std::ops::Div for Quantity {
    type Output = Quantity;
    fn div(self, rhs: Quantity) -> Quantity {
        Quantity(self.0 / rhs.0)
    }
}

impl std::ops::Neg for Quantity {
    type Output = Quantity;
    fn neg(self) -> Quantity {
        Quantity(-self.0)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            return write!(f, "{}", self.numer());
        }
        match self.terminating_decimal() {
            Some(s) => f.write_str(&s),
            None => write!(f, "{}/{}", self.numer(), self.denom()),
        }
    }
}

fn parse_decimal(s: &str) -> Option<Rational64> {
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // Strip trailing zeros so `1.50000000000000000000` parses.
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.len() > 18 {
        return None;
    }
    let scale = 10i64.checked_pow(frac_part.len() as u32)?;
    let int_value: i64 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
    let frac_value: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().ok()? };
    let numer = int_value.checked_mul(scale)?.checked_add(frac_value)?;
    let numer = if negative { -numer } else { numer };
    Some(Rational64::new(numer, scale))
}

impl FromStr for Quantity {
    type Err = QuantityParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let err = || QuantityParseError(trimmed.to_string());
        if let Some((n, d)) = trimmed.split_once('/') {
            let numer: i64 = n.trim().parse().map_err(|_| err())?;
            let denom: i64 = d.trim().parse().map_err(|_| err())?;
            if denom == 0 {
                return Err(err());
            }
            return Ok(Quantity(Rational64::new(numer, denom)));
        }
        parse_decimal(trimmed).map(Quantity).ok_or_else(err)
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_integer() {
            return serializer.serialize_i64(self.numer());
        }
        match self.terminating_decimal() {
            // Shortest-repr f64 printing round-trips these through `Display`.
            Some(s) => match s.parse::<f64>() {
                Ok(v) if format!("{v}") == s => serializer.serialize_f64(v),
                _ => serializer.serialize_str(&s),
            },
            None => serializer.serialize_str(&self.to_string()),
        }
    }
}

struct QuantityVisitor;

impl<'de> Visitor<'de> for QuantityVisitor {
    type Value = Quantity;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or a string holding a decimal or fraction")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Quantity, E> {
        Ok(Quantity::from_integer(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Quantity, E> {
        i64::try_from(v)
            .map(Quantity::from_integer)
            .map_err(|_| E::custom(format!("number {v} out of range")))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Quantity, E> {
        if !v.is_finite() {
            return Err(E::custom("non-finite number"));
        }
        format!("{v}")
            .parse()
            .map_err(|_| E::custom(format!("number {v} cannot be represented exactly")))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Quantity, E> {
        v.parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(QuantityVisitor)
    }
}
