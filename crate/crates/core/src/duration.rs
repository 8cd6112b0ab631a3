//! Durations written as `<N>m`, `<N>h` or `<N>d`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid duration `{0}` (expected e.g. `90m`, `6h`, `2d`)")]
pub struct DurationError(pub String);

/// Parses a duration into whole minutes.
pub fn parse_minutes(raw: &str) -> Result<i64, DurationError> {
    let raw = raw.trim();
    let err = || DurationError(raw.to_string());
    let unit = raw.chars().last().ok_or_else(err)?;
    let factor = match unit {
        'm' => 1,
        'h' => 60,
        'd' => 1440,
        _ => return Err(err()),
    };
    let digits = &raw[..raw.len() - 1];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    digits
        .parse::<i64>()
        .ok()
        .and_then(|n| n.checked_mul(factor))
        .ok_or_else(err)
}

pub fn format_minutes(minutes: i64) -> String {
    if minutes != 0 && minutes % 1440 == 0 {
        format!("{}d", minutes / 1440)
    } else if minutes != 0 && minutes % 60 == 0 {
        format!("{}h", minutes / 60)
    } else {
        format!("{minutes}m")
    }
}
