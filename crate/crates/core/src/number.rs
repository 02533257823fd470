//! Fixed-precision decimal numbers used for every numeric cell and result.
//!
//! Values are kept to [`SIGNIFICANT_DIGITS`] significant digits so that
//! aggregations are reproducible and independent of summation order.

use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::Decimal;

pub const SIGNIFICANT_DIGITS: u32 = 12;

const CURRENCY: &[char] = &['$', '€', '£', '¥', '₹'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Number(Decimal);

impl Number {
    pub fn new(d: Decimal) -> Self {
        Number(round(d).normalize())
    }

    pub fn from_i64(v: i64) -> Self {
        Number::new(Decimal::from(v))
    }

    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        Decimal::from_f64(v).map(Number::new)
    }

    pub fn as_decimal(&self) -> Decimal {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_div(self, rhs: Number) -> Option<Number> {
        self.0.checked_div(rhs.0).map(Number::new)
    }

    pub fn checked_mul(self, rhs: Number) -> Option<Number> {
        self.0.checked_mul(rhs.0).map(Number::new)
    }

    /// Equality within a relative tolerance, on the `f64` images.
    pub fn approx_eq(&self, other: &Number, rel_tol: f64) -> bool {
        if self == other {
            return true;
        }
        let (a, b) = (self.to_f64(), other.to_f64());
        (a - b).abs() <= rel_tol * a.abs().max(b.abs())
    }
}

fn round(d: Decimal) -> Decimal {
    if d.is_zero() {
        return Decimal::ZERO;
    }
    d.round_sf(SIGNIFICANT_DIGITS).unwrap_or(d)
}

impl fmt::Display for Number {
    /// Shortest decimal form: no trailing zeros, no exponent, `0` for zero.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_zero() {
            return f.write_str("0");
        }
        write!(f, "{}", self.0.normalize())
    }
}

impl std::ops::Add for Number {
    type Output = Number;
    fn add(self, rhs: Number) -> Number {
        Number::new(self.0 + rhs.0)
    }
}

impl Sum for Number {
    /// Exact accumulation, rounded once at the end.
    fn sum<I: Iterator<Item = Number>>(iter: I) -> Number {
        Number::new(iter.fold(Decimal::ZERO, |acc, n| acc + n.0))
    }
}

/// Result of [`normalize_numeric_cell`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Numeric {
    Num(Number),
    NonNumeric,
}

impl Numeric {
    pub fn number(self) -> Option<Number> {
        match self {
            Numeric::Num(n) => Some(n),
            Numeric::NonNumeric => None,
        }
    }
}

/// Interpret a raw cell string as a number.
///
/// Rules, in order: a direct decimal parse after removing thousands
/// separators, one leading `+`, currency symbols and `%`; otherwise, if the
/// string contains `=`, the same parse applied to the text after the last
/// `=`; otherwise non-numeric.
pub fn normalize_numeric_cell(raw: &str) -> Numeric {
    if let Some(n) = parse_plain(raw) {
        return Numeric::Num(n);
    }
    if let Some(idx) = raw.rfind('=') {
        if let Some(n) = parse_plain(&raw[idx + 1..]) {
            return Numeric::Num(n);
        }
    }
    Numeric::NonNumeric
}

fn parse_plain(raw: &str) -> Option<Number> {
    let cleaned: String = raw.chars().filter(|c| *c != ',' && *c != '%' && !CURRENCY.contains(c)).collect();
    let mut s = cleaned.trim();
    if let Some(rest) = s.strip_prefix('+') {
        s = rest.trim_start();
    }
    if s.is_empty() || s.starts_with('+') {
        return None;
    }
    // Decimal::from_str accepts forms like "1_000"; only plain digits, one
    // optional sign and one optional point are allowed here.
    let body = s.strip_prefix('-').unwrap_or(s);
    let mut seen_point = false;
    let mut seen_digit = false;
    for c in body.chars() {
        match c {
            '0'..='9' => seen_digit = true,
            '.' if !seen_point => seen_point = true,
            _ => return None,
        }
    }
    if !seen_digit {
        return None;
    }
    Decimal::from_str(s).ok().map(Number::new)
}

impl FromStr for Number {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_numeric_cell(s).number().ok_or(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(s: &str) -> Number {
        Number::new(Decimal::from_str(s).unwrap())
    }

    #[test]
    fn arithmetic_cell_takes_trailing_value() {
        assert_eq!(normalize_numeric_cell("74 + 70 + 71 + 69 = 284"), Numeric::Num(num("284")));
    }

    #[test]
    fn leading_plus_with_space() {
        assert_eq!(normalize_numeric_cell("+ 12"), Numeric::Num(num("12")));
        assert_eq!(normalize_numeric_cell("+12"), Numeric::Num(num("12")));
    }

    #[test]
    fn even_par_is_not_a_number() {
        assert_eq!(normalize_numeric_cell("e"), Numeric::NonNumeric);
        assert_eq!(normalize_numeric_cell(""), Numeric::NonNumeric);
        assert_eq!(normalize_numeric_cell("+"), Numeric::NonNumeric);
        assert_eq!(normalize_numeric_cell("++3"), Numeric::NonNumeric);
        assert_eq!(normalize_numeric_cell("1_000"), Numeric::NonNumeric);
    }

    #[test]
    fn separators_and_symbols() {
        assert_eq!(normalize_numeric_cell("$1,000"), Numeric::Num(num("1000")));
        assert_eq!(normalize_numeric_cell("45%"), Numeric::Num(num("45")));
        assert_eq!(normalize_numeric_cell("-3.50"), Numeric::Num(num("3.5").checked_mul(num("-1")).unwrap()));
    }

    #[test]
    fn canonical_rendering() {
        assert_eq!(num("600.0").to_string(), "600");
        assert_eq!(num("0.000").to_string(), "0");
        assert_eq!(num("-0").to_string(), "0");
        assert_eq!(num("12.50").to_string(), "12.5");
    }

    #[test]
    fn twelve_significant_digits() {
        let third = num("1").checked_div(num("3")).unwrap();
        assert_eq!(third.to_string(), "0.333333333333");
        assert_eq!(num("1234567890123456").to_string(), "1234567890120000");
    }
}
