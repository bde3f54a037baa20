//! Exact rational helpers shared by the spec model, emulator and monitor.

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

/// Exact rational used for capacities, loss rates and metric values.
pub type Rational = num_rational::Ratio<i128>;

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid number `{0}`")]
pub struct ParseRationalError(pub String);

/// Parses `p/q`, integers and plain decimals (`-0.125`) exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: i128 = num.trim().parse().map_err(|_| err())?;
        let d: i128 = den.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return Err(err());
    }
    let mut numer: i128 = 0;
    for b in int_part.bytes().chain(frac_part.bytes()) {
        numer = numer
            .checked_mul(10)
            .and_then(|v| v.checked_add(i128::from(b - b'0')))
            .ok_or_else(err)?;
    }
    let denom = 10i128
        .checked_pow(u32::try_from(frac_part.len()).map_err(|_| err())?)
        .ok_or_else(err)?;
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

/// Renders `p/q` in lowest terms; integers are rendered as `p/1`.
pub fn to_fraction_string(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Decimal rendering with at most `digits` fractional digits, rounding half
/// to even. Trailing zeros (and a bare trailing point) are dropped.
pub fn format_decimal(value: &Rational, digits: u32) -> String {
    let negative = value.is_negative();
    let abs = value.abs();
    let scale = 10i128.pow(digits);
    let (mut scaled, rem) = (abs.numer() * scale).div_rem(abs.denom());
    let twice = rem * 2;
    if twice > *abs.denom() || (twice == *abs.denom() && scaled.is_odd()) {
        scaled += 1;
    }
    let (int_part, frac_part) = scaled.div_rem(&scale);
    let mut out = String::new();
    if negative && !scaled.is_zero() {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if digits > 0 && !frac_part.is_zero() {
        let frac = format!("{:0width$}", frac_part, width = digits as usize);
        out.push('.');
        out.push_str(frac.trim_end_matches('0'));
    }
    out
}

/// `ceil(value)` for a non-negative rational.
pub fn ceil_nonneg(value: &Rational) -> u64 {
    debug_assert!(!value.is_negative());
    let (q, r) = value.numer().div_rem(value.denom());
    let q = if r.is_zero() { q } else { q + 1 };
    q.to_u64().unwrap_or(u64::MAX)
}

/// Converts seconds-denominated work to nanoseconds: `ceil(units * 1e9 / rate)`.
pub fn ceil_nanos(units: &Rational, rate: &Rational) -> u64 {
    if units.is_zero() {
        return 0;
    }
    ceil_nonneg(&(units * Rational::from_integer(NANOS_PER_SEC as i128) / rate))
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Shortest decimal text of a float, which `parse_rational` reads back exactly.
pub fn rational_from_f64_text(value: f64) -> Option<Rational> {
    if !value.is_finite() {
        return None;
    }
    parse_rational(&format!("{value}")).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(parse_rational("0.01").unwrap(), r(1, 100));
        assert_eq!(parse_rational("-1.5").unwrap(), r(-3, 2));
        assert_eq!(parse_rational("6/4").unwrap(), r(3, 2));
        assert_eq!(parse_rational("42").unwrap(), r(42, 1));
        assert_eq!(parse_rational(".5").unwrap(), r(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1e5").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn decimal_rendering_rounds_half_even() {
        assert_eq!(format_decimal(&r(1, 3), 9), "0.333333333");
        assert_eq!(format_decimal(&r(2, 3), 9), "0.666666667");
        assert_eq!(format_decimal(&r(5, 1), 9), "5");
        assert_eq!(format_decimal(&r(1, 4), 9), "0.25");
        // exactly half at the last digit
        assert_eq!(format_decimal(&r(25, 1000), 2), "0.02");
        assert_eq!(format_decimal(&r(35, 1000), 2), "0.04");
        assert_eq!(format_decimal(&r(-1, 2), 0), "0");
        assert_eq!(format_decimal(&r(-3, 2), 0), "-2");
        assert_eq!(format_decimal(&r(-1, 8), 9), "-0.125");
    }

    #[test]
    fn ceil_helpers() {
        assert_eq!(ceil_nonneg(&r(5, 2)), 3);
        assert_eq!(ceil_nonneg(&r(4, 2)), 2);
        assert_eq!(ceil_nanos(&r(1, 1), &r(10, 1)), 100_000_000);
        assert_eq!(ceil_nanos(&r(0, 1), &r(3, 1)), 0);
        assert_eq!(ceil_nanos(&r(1, 1), &r(3, 1)), 333_333_334);
    }

    #[test]
    fn float_text_is_exact_decimal() {
        assert_eq!(rational_from_f64_text(0.1), Some(r(1, 10)));
        assert_eq!(rational_from_f64_text(2.0), Some(r(2, 1)));
        assert_eq!(rational_from_f64_text(f64::NAN), None);
    }
}
