//! Size arguments: `512KiB`, `2MiB`, `1000` (bytes) or `500Kparams`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Size {
    Bytes(u64),
    /// A parameter budget; becomes bytes once the storage width is known.
    Params(u64),
}

impl Size {
    pub fn bytes(self, bytes_per_param: u64) -> u64 {
        match self {
            Size::Bytes(b) => b,
            Size::Params(p) => p.saturating_mul(bytes_per_param),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid size `{0}` (expected e.g. 524288, 512KiB, 2MiB, 500Kparams)")]
pub struct SizeError(String);

fn split_number(s: &str) -> (&str, &str) {
    let end = s.find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '_')).unwrap_or(s.len());
    (&s[..end], &s[end..])
}

fn scaled(number: &str, scale: u64, raw: &str) -> Result<u64, SizeError> {
    let err = || SizeError(raw.to_string());
    let number = number.replace('_', "");
    if let Ok(n) = number.parse::<u64>() {
        return n.checked_mul(scale).ok_or_else(err);
    }
    let x: f64 = number.parse().map_err(|_| err())?;
    let v = x * scale as f64;
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(err());
    }
    Ok(v as u64)
}

impl FromStr for Size {
    type Err = SizeError;

    fn from_str(raw: &str) -> Result<Self, SizeError> {
        let s = raw.trim();
        let (number, unit) = split_number(s);
        if number.is_empty() {
            return Err(SizeError(raw.to_string()));
        }
        let lower = unit.trim().to_ascii_lowercase();
        if let Some(prefix) = lower.strip_suffix("params") {
            let scale = match prefix {
                "" => 1,
                "k" => 1_000,
                "m" => 1_000_000,
                _ => return Err(SizeError(raw.to_string())),
            };
            return scaled(number, scale, raw).map(Size::Params);
        }
        let scale = match lower.as_str() {
            "" | "b" => 1,
            "kib" | "ki" => 1 << 10,
            "mib" | "mi" => 1 << 20,
            "gib" | "gi" => 1 << 30,
            "kb" | "k" => 1_000,
            "mb" | "m" => 1_000_000,
            "gb" | "g" => 1_000_000_000,
            _ => return Err(SizeError(raw.to_string())),
        };
        scaled(number, scale, raw).map(Size::Bytes)
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Size::Bytes(b) => write!(f, "{b} B"),
            Size::Params(p) => write!(f, "{p} params"),
        }
    }
}
