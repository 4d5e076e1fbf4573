//! Locale-independent number formatting and symbolic `b` tokens.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significant digits in serialized output.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` like C's `%.12g`: 12 significant digits, trailing zeros
/// trimmed, exponent notation outside `[1e-4, 1e12)`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let p = SIGNIFICANT_DIGITS;
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds `x` to the value printed by [`fmt_g`].
pub fn round_g(x: f64) -> f64 {
    if x.is_finite() {
        fmt_g(x).parse().expect("fmt_g output parses")
    } else {
        x
    }
}

/// A `b` (or `p`) value, optionally written symbolically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BValue {
    pub value: f64,
    pub token: BToken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BToken {
    Decimal,
    /// `1/√2`
    InvSqrt2,
    /// `1/√3`
    InvSqrt3,
}

impl BValue {
    pub fn decimal(value: f64) -> Self {
        BValue {
            value,
            token: BToken::Decimal,
        }
    }
}

impl FromStr for BValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "isqrt2" => Ok(BValue {
                value: std::f64::consts::FRAC_1_SQRT_2,
                token: BToken::InvSqrt2,
            }),
            "isqrt3" => Ok(BValue {
                value: 1.0 / 3f64.sqrt(),
                token: BToken::InvSqrt3,
            }),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(BValue::decimal)
                .ok_or_else(|| Error::InvalidModel(format!("cannot parse number '{s}'"))),
        }
    }
}

impl fmt::Display for BValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.token {
            BToken::Decimal => f.write_str(&fmt_g(self.value)),
            BToken::InvSqrt2 => f.write_str("isqrt2"),
            BToken::InvSqrt3 => f.write_str("isqrt3"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1875, "0.1875"),
            (1.0 / 3.0, "0.333333333333"),
            (2.0 / 3.0, "0.666666666667"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (6.3125, "6.3125"),
            (1e100, "1e+100"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g(x), s, "{x}");
        }
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [std::f64::consts::PI, 1e-7 / 3.0, 12345.678901234567] {
            let r = round_g(x);
            assert_eq!(round_g(r), r);
            assert!((r - x).abs() <= 1e-11 * x.abs());
        }
    }

    #[test]
    fn tokens() {
        let b: BValue = "isqrt3".parse().unwrap();
        assert!((b.value * b.value * 3.0 - 1.0).abs() < 1e-15);
        assert_eq!(b.to_string(), "isqrt3");
        let b: BValue = "isqrt2".parse().unwrap();
        assert_eq!(b.value, std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!("0.5".parse::<BValue>().unwrap().to_string(), "0.5");
        assert!("half".parse::<BValue>().is_err());
        assert!("inf".parse::<BValue>().is_err());
    }
}
