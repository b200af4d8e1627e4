//! Quantities with explicit unit suffixes, as accepted in topology and design
//! documents. Bandwidth is decimal (`8Gbps` = 8e9 bit/s); memory sizes are
//! binary (`1GB` = 2^30 bytes); time accepts `s`, `ms`, `us` and `ns`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GBPS: f64 = 1e9;
pub const KIB: u64 = 1 << 10;
pub const MIB: u64 = 1 << 20;
pub const GIB: u64 = 1 << 30;

/// A number, or a string with a unit suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

fn split_unit(s: &str) -> (&str, &str) {
    let s = s.trim();
    let idx = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || c == '-' || c == '+'))
        .unwrap_or(s.len());
    // `e` is ambiguous only when it starts a unit, which none of ours do.
    (s[..idx].trim(), s[idx..].trim())
}

fn parse_scaled(field: &str, q: &Quantity, units: &[(&str, f64)]) -> Result<f64> {
    let value = match q {
        Quantity::Number(v) => *v,
        Quantity::Text(s) => {
            let (num, unit) = split_unit(s);
            let v: f64 = num
                .parse()
                .map_err(|_| Error::parse(field, format!("cannot read number from `{s}`")))?;
            if unit.is_empty() {
                v
            } else {
                let scale = units
                    .iter()
                    .find(|(u, _)| u.eq_ignore_ascii_case(unit))
                    .map(|(_, k)| *k)
                    .ok_or_else(|| Error::parse(field, format!("unknown unit `{unit}`")))?;
                v * scale
            }
        }
    };
    if !value.is_finite() || value < 0.0 {
        return Err(Error::parse(field, format!("value must be finite and non-negative, got {value}")));
    }
    Ok(value)
}

/// Bandwidth in bits per second.
pub fn parse_bandwidth(field: &str, q: &Quantity) -> Result<f64> {
    parse_scaled(
        field,
        q,
        &[("bps", 1.0), ("kbps", 1e3), ("mbps", 1e6), ("gbps", 1e9), ("tbps", 1e12)],
    )
}

/// Memory size in bytes.
pub fn parse_bytes(field: &str, q: &Quantity) -> Result<u64> {
    let v = parse_scaled(
        field,
        q,
        &[
            ("b", 1.0),
            ("kb", KIB as f64),
            ("mb", MIB as f64),
            ("gb", GIB as f64),
            ("tb", (GIB as f64) * 1024.0),
        ],
    )?;
    Ok(v.round() as u64)
}

/// Time in seconds.
pub fn parse_seconds(field: &str, q: &Quantity) -> Result<f64> {
    parse_scaled(field, q, &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9)])
}

/// Frequency in Hz.
pub fn parse_frequency(field: &str, q: &Quantity) -> Result<f64> {
    parse_scaled(field, q, &[("hz", 1.0), ("khz", 1e3), ("mhz", 1e6), ("ghz", 1e9)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Quantity {
        Quantity::Text(s.to_string())
    }

    #[test]
    fn suffixes() {
        assert_eq!(parse_bandwidth("bw", &t("8Gbps")).unwrap(), 8e9);
        assert_eq!(parse_bandwidth("bw", &t("2 Gbps")).unwrap(), 2e9);
        assert_eq!(parse_bandwidth("bw", &Quantity::Number(5.0)).unwrap(), 5.0);
        assert_eq!(parse_bytes("mem", &t("1GB")).unwrap(), GIB);
        assert_eq!(parse_seconds("lat", &t("1us")).unwrap(), 1e-6);
        assert_eq!(parse_frequency("freq", &t("200MHz")).unwrap(), 200e6);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_bandwidth("bw", &t("fast")).is_err());
        assert!(parse_bandwidth("bw", &t("8 parsecs")).is_err());
        assert!(parse_bytes("mem", &Quantity::Number(-1.0)).is_err());
    }
}
