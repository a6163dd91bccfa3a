//! Parsing of unit-carrying quantities and of [`QdParams`] from TOML.
//!
//! Quantities are written either as bare numbers in the crate's native unit
//! for the field, or as strings with a unit suffix: `"3.7 meV"`,
//! `"110 ueV"`, `"4.33 ns^-1"`, `"231 ps"`, `"43 K"`.

use thiserror::Error;
use toml::{Table, Value};

use crate::levels::QdParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    /// meV
    Energy,
    /// ns⁻¹
    Rate,
    /// ns
    Time,
    /// K
    Temperature,
    Dimensionless,
}

fn unit_factor(dim: Dimension, unit: &str) -> Option<f64> {
    let u = unit.trim();
    match dim {
        Dimension::Energy => match u {
            "eV" => Some(1e3),
            "meV" => Some(1.0),
            "ueV" | "µeV" | "μeV" => Some(1e-3),
            _ => None,
        },
        Dimension::Rate => match u {
            "ns^-1" | "1/ns" | "/ns" | "ns-1" => Some(1.0),
            "ps^-1" | "1/ps" | "/ps" | "ps-1" => Some(1e3),
            "s^-1" | "1/s" | "Hz" => Some(1e-9),
            "GHz" => Some(1.0),
            "MHz" => Some(1e-3),
            _ => None,
        },
        Dimension::Time => match u {
            "s" => Some(1e9),
            "us" | "µs" | "μs" => Some(1e3),
            "ns" => Some(1.0),
            "ps" => Some(1e-3),
            "fs" => Some(1e-6),
            _ => None,
        },
        Dimension::Temperature => (u == "K").then_some(1.0),
        Dimension::Dimensionless => u.is_empty().then_some(1.0),
    }
}

/// Parse `"<number> <unit>"` into the native unit of `dim`.
pub fn parse_quantity(s: &str, dim: Dimension) -> Result<f64, String> {
    let s = s.trim();
    let split = s
        .char_indices()
        .find(|&(i, c)| c.is_alphabetic() && !(matches!(c, 'e' | 'E') && s[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+')))
        .map_or(s.len(), |(i, _)| i);
    let (num, unit) = s.split_at(split);
    let unit = unit.trim();
    let value: f64 = num.trim().parse().map_err(|_| format!("cannot parse number in `{s}`"))?;
    let factor = if unit.is_empty() && dim != Dimension::Dimensionless {
        return Err(format!("`{s}` lacks a unit"));
    } else {
        unit_factor(dim, unit).ok_or_else(|| format!("unit `{unit}` does not fit a {dim:?} quantity"))?
    };
    Ok(value * factor)
}

/// Read a TOML value as a quantity. Bare numbers are taken in `native`
/// units, which are `scale` times the dimension's base unit.
pub fn quantity(key: &str, v: &Value, dim: Dimension, scale: f64) -> Result<f64, ConfigError> {
    let bad = |reason: String| ConfigError::BadValue { key: key.to_string(), reason };
    let x = match v {
        Value::Float(f) => *f,
        Value::Integer(i) => *i as f64,
        Value::String(s) => parse_quantity(s, dim).map_err(bad)? / scale,
        other => return Err(bad(format!("expected a number or a quantity string, got {}", other.type_str()))),
    };
    if !x.is_finite() {
        return Err(bad("not finite".into()));
    }
    Ok(x)
}

fn multiplicity(key: &str, v: &Value) -> Result<u32, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 1 && *i <= u32::MAX as i64 => Ok(*i as u32),
        _ => Err(ConfigError::BadValue { key: key.to_string(), reason: "expected a positive integer".into() }),
    }
}

/// Build parameters from a TOML table; absent keys keep their defaults.
pub fn params_from_table(table: &Table) -> Result<QdParams, ConfigError> {
    let mut p = QdParams::default();
    for (key, v) in table {
        match key.as_str() {
            "delta_e" => p.delta_e = quantity(key, v, Dimension::Energy, 1.0)?,
            "fss" => p.fss = quantity(key, v, Dimension::Energy, 1e-3)?,
            "bd_split" => p.bd_split = quantity(key, v, Dimension::Energy, 1e-3)?,
            "gamma_x" => p.gamma_x = quantity(key, v, Dimension::Rate, 1.0)?,
            "gamma_xx" => p.gamma_xx = quantity(key, v, Dimension::Rate, 1.0)?,
            "gamma_xstar" => p.gamma_xstar = quantity(key, v, Dimension::Rate, 1.0)?,
            "gamma_ph0" => p.gamma_ph0 = quantity(key, v, Dimension::Rate, 1.0)?,
            "dephasing_rate" => p.dephasing_rate = quantity(key, v, Dimension::Rate, 1.0)?,
            "dark_relax_factor" => p.dark_relax_factor = quantity(key, v, Dimension::Dimensionless, 1.0)?,
            "m_xstar" => p.m_xstar = multiplicity(key, v)?,
            "m_xxstar" => p.m_xxstar = multiplicity(key, v)?,
            "m_xd" => p.m_xd = multiplicity(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.clone())),
        }
    }
    p.validate().map_err(|e| ConfigError::BadValue { key: "params".into(), reason: e.to_string() })?;
    Ok(p)
}

pub fn params_from_str(s: &str) -> Result<QdParams, ConfigError> {
    params_from_table(&s.parse::<Table>()?)
}

/// Render parameters as a TOML table with explicit units.
pub fn params_to_table(p: &QdParams) -> Table {
    let mut t = Table::new();
    let mut put = |k: &str, v: Value| {
        t.insert(k.to_string(), v);
    };
    put("delta_e", Value::String(format!("{} meV", p.delta_e)));
    put("fss", Value::String(format!("{} ueV", p.fss)));
    put("bd_split", Value::String(format!("{} ueV", p.bd_split)));
    put("gamma_x", Value::String(format!("{} ns^-1", p.gamma_x)));
    put("gamma_xx", Value::String(format!("{} ns^-1", p.gamma_xx)));
    put("gamma_xstar", Value::String(format!("{} ns^-1", p.gamma_xstar)));
    put("gamma_ph0", Value::String(format!("{} ns^-1", p.gamma_ph0)));
    put("m_xstar", Value::Integer(p.m_xstar as i64));
    put("m_xxstar", Value::Integer(p.m_xxstar as i64));
    put("m_xd", Value::Integer(p.m_xd as i64));
    put("dephasing_rate", Value::String(format!("{} ns^-1", p.dephasing_rate)));
    put("dark_relax_factor", Value::Float(p.dark_relax_factor));
    t
}
