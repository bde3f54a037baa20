//! Duration and bandwidth literals (`50ms`, `1.5us`, `10Mbps`).

use num_traits::{Signed, ToPrimitive};

use super::model::Bandwidth;
use crate::rational::{parse_rational, Rational};

fn split_suffix<'a>(text: &'a str, suffixes: &[(&'static str, i128)]) -> (&'a str, i128) {
    for (suffix, mult) in suffixes {
        if let Some(number) = text.strip_suffix(suffix) {
            return (number.trim_end(), *mult);
        }
    }
    (text, 1)
}

fn scaled_integer(number: &str, mult: i128) -> Result<u64, String> {
    let value = parse_rational(number).map_err(|e| e.to_string())? * Rational::from_integer(mult);
    if value.is_negative() {
        return Err(format!("negative value `{number}`"));
    }
    if !value.is_integer() {
        return Err(format!("`{number}` is not a whole number of base units"));
    }
    value
        .to_integer()
        .to_u64()
        .ok_or_else(|| format!("`{number}` is out of range"))
}

/// Parses a duration into integer nanoseconds. A bare number means nanoseconds.
pub fn parse_duration_ns(text: &str) -> Result<u64, String> {
    // `ns` and `us` must be tried before the bare `s`.
    const SUFFIXES: [(&str, i128); 4] = [("ns", 1), ("us", 1_000), ("ms", 1_000_000), ("s", 1_000_000_000)];
    let text = text.trim();
    let (number, mult) = split_suffix(text, &SUFFIXES);
    scaled_integer(number, mult).map_err(|e| format!("invalid duration: {e}"))
}

/// Parses a bandwidth; a bare number means bits per second.
pub fn parse_bandwidth(text: &str) -> Result<Bandwidth, String> {
    const SUFFIXES: [(&str, i128); 4] = [
        ("Gbps", 1_000_000_000),
        ("Mbps", 1_000_000),
        ("Kbps", 1_000),
        ("bps", 1),
    ];
    let text = text.trim();
    if text.eq_ignore_ascii_case("unlimited") {
        return Ok(Bandwidth::Unlimited);
    }
    let (number, mult) = split_suffix(text, &SUFFIXES);
    scaled_integer(number, mult)
        .map(Bandwidth::BitsPerSecond)
        .map_err(|e| format!("invalid bandwidth: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        assert_eq!(parse_duration_ns("50ms").unwrap(), 50_000_000);
        assert_eq!(parse_duration_ns("1.5us").unwrap(), 1_500);
        assert_eq!(parse_duration_ns("2s").unwrap(), 2_000_000_000);
        assert_eq!(parse_duration_ns("17ns").unwrap(), 17);
        assert_eq!(parse_duration_ns("17").unwrap(), 17);
        assert_eq!(parse_duration_ns("0.25 s").unwrap(), 250_000_000);
        assert!(parse_duration_ns("-5ms").is_err());
        assert!(parse_duration_ns("1.5ns").is_err());
        assert!(parse_duration_ns("5h").is_err());
    }

    #[test]
    fn bandwidths() {
        assert_eq!(parse_bandwidth("1Mbps").unwrap(), Bandwidth::BitsPerSecond(1_000_000));
        assert_eq!(parse_bandwidth("2.5Kbps").unwrap(), Bandwidth::BitsPerSecond(2_500));
        assert_eq!(
            parse_bandwidth("10Gbps").unwrap(),
            Bandwidth::BitsPerSecond(10_000_000_000)
        );
        assert_eq!(parse_bandwidth("800bps").unwrap(), Bandwidth::BitsPerSecond(800));
        assert_eq!(parse_bandwidth("unlimited").unwrap(), Bandwidth::Unlimited);
        assert!(parse_bandwidth("fast").is_err());
    }
}
