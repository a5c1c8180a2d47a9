//! Length parsing with explicit unit suffixes.
//!
//! All internal lengths are SI meters. Configuration files carry explicit
//! suffixes (`m`, `mm`, `um`, `nm`) which are converted at parse time, so a
//! value like `"532nm"` or `"800 mm"` always lands in meters. Only lengths
//! are supported; this is not a general units library.

use crate::error::{Error, Result};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A physical length in meters, parsed from a suffixed string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Length(pub f64);

impl Length {
    pub fn meters(self) -> f64 {
        self.0
    }
}

/// Parse a length like `"90um"`, `"3 mm"`, `"0.532um"` or `"0.8m"` to meters.
pub fn parse_length(s: &str) -> Result<f64> {
    let s = s.trim();
    let suffixes: [(&str, f64); 4] = [("nm", 1e-9), ("um", 1e-6), ("mm", 1e-3), ("m", 1.0)];
    for (suffix, scale) in suffixes {
        if let Some(num) = s.strip_suffix(suffix) {
            let num = num.trim();
            // "m" would otherwise also match the tail of "mm"/"um"/"nm"
            if num.ends_with(['n', 'u', 'm']) {
                continue;
            }
            let value: f64 = num
                .parse()
                .map_err(|_| Error::invalid(format!("cannot parse length `{s}`")))?;
            if !value.is_finite() {
                return Err(Error::invalid(format!("non-finite length `{s}`")));
            }
            return Ok(value * scale);
        }
    }
    Err(Error::invalid(format!(
        "length `{s}` must carry a unit suffix (m, mm, um, nm)"
    )))
}

/// Format a length in meters back to a suffixed string (used when echoing
/// effective configs into the run manifest).
pub fn format_length(meters: f64) -> String {
    let a = meters.abs();
    let (scale, suffix) = if a == 0.0 {
        return "0m".to_string();
    } else if a < 1e-6 {
        (1e9, "nm")
    } else if a < 1e-3 {
        (1e6, "um")
    } else if a < 1.0 {
        (1e3, "mm")
    } else {
        (1.0, "m")
    };
    // 6 decimals (sub-femtometer here), then strip the float noise
    let mut num = format!("{:.6}", meters * scale);
    while num.ends_with('0') {
        num.pop();
    }
    if num.ends_with('.') {
        num.pop();
    }
    format!("{num}{suffix}")
}

impl Serialize for Length {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_length(self.0))
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_length(&s).map(Length).map_err(de::Error::custom)
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_length(self.0))
    }
}
