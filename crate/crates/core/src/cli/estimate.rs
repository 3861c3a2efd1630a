//! Projected transfer savings for a model hub.
//!
//! Sizes use decimal units throughout: GB is 10^9 bytes, PB is 10^15.

use crate::error::{Error, Result};

/// Bytes saved per month when `downloads` copies of a `model_size`-byte model
/// are served compressed to `ratio` of their size.
pub fn estimate_savings(model_size: f64, downloads: f64, ratio: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidArgument(format!(
            "ratio {ratio} is outside [0, 1]"
        )));
    }
    if !(model_size.is_finite() && model_size >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid model size {model_size}"
        )));
    }
    if !(downloads.is_finite() && downloads >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid download count {downloads}"
        )));
    }
    Ok(model_size * downloads * (1.0 - ratio))
}

const UNITS: [(&str, f64); 5] = [
    ("PB", 1e15),
    ("TB", 1e12),
    ("GB", 1e9),
    ("MB", 1e6),
    ("KB", 1e3),
];

/// Formats a byte count with one decimal in the largest unit that fits.
pub fn format_bytes(bytes: f64) -> String {
    for (unit, scale) in UNITS {
        if bytes >= scale {
            return format!("{:.1} {unit}", bytes / scale);
        }
    }
    format!("{bytes:.0} B")
}

fn parse_scaled(s: &str, suffixes: &[(&str, f64)]) -> Result<f64> {
    let t = s.trim();
    let upper = t.to_ascii_uppercase();
    let (num, scale) = suffixes
        .iter()
        .find(|(suffix, _)| !suffix.is_empty() && upper.ends_with(suffix))
        .map_or((t, 1.0), |(suffix, scale)| {
            (&t[..t.len() - suffix.len()], *scale)
        });
    num.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
        .map(|v| v * scale)
        .ok_or_else(|| Error::InvalidArgument(format!("cannot parse `{s}`")))
}

/// Parses `1.26GB`, `500 MB`, `1e9` and similar into bytes.
pub fn parse_size(s: &str) -> Result<f64> {
    parse_scaled(
        s,
        &[
            ("PB", 1e15),
            ("TB", 1e12),
            ("GB", 1e9),
            ("MB", 1e6),
            ("KB", 1e3),
            ("B", 1.0),
        ],
    )
}

/// Parses `63M`, `278K`, `15e6` and similar.
pub fn parse_count(s: &str) -> Result<f64> {
    parse_scaled(s, &[("B", 1e9), ("G", 1e9), ("M", 1e6), ("K", 1e3)])
}

/// Parses `0.852` or `85.2%`.
pub fn parse_ratio(s: &str) -> Result<f64> {
    let t = s.trim();
    match t.strip_suffix('%') {
        Some(p) => parse_scaled(p, &[]).map(|v| v / 100.0),
        None => parse_scaled(t, &[]),
    }
}
