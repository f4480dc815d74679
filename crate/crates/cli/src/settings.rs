//! Config file loading and dotted-key overrides.

use std::path::Path;

use qring::Config;
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
    #[error("`{key}` conflicts with a non-table value at `{at}`")]
    KeyConflict { key: String, at: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub fn read_table(path: &Path) -> Result<Table, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    text.parse::<Table>().map_err(|source| ConfigError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Parses the right-hand side as a TOML value, falling back to a bare
/// string.
pub fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn set(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(key.to_string()));
    }
    let (last, sections) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for (i, part) in sections.iter().enumerate() {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::KeyConflict {
                key: key.to_string(),
                at: parts[..=i].join("."),
            })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    set(table, key.trim(), parse_value(raw.trim()))
}

pub fn resolve(table: Table) -> Result<Config, ConfigError> {
    Config::deserialize(Value::Table(table)).map_err(|e| ConfigError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let mut t = Table::new();
        apply_override(&mut t, "model.lambda=-0.2").unwrap();
        apply_override(&mut t, "sweep.alphas=[0.0, 1.0]").unwrap();
        apply_override(&mut t, "evolve.scheme=crank-nicolson").unwrap();
        apply_override(&mut t, "grid.points = 128").unwrap();
        let c = resolve(t).unwrap();
        assert_eq!(c.model.lambda, -0.2);
        assert_eq!(c.sweep.alphas, vec![0.0, 1.0]);
        assert_eq!(c.evolve.scheme, "crank-nicolson");
        assert_eq!(c.grid.points, 128);
        assert_eq!(c.model.n_apparatus, 100);
    }

    #[test]
    fn rejects_bad_overrides() {
        let mut t = Table::new();
        assert!(apply_override(&mut t, "model.lambda").is_err());
        assert!(apply_override(&mut t, ".x=1").is_err());
        apply_override(&mut t, "model=3").unwrap();
        assert!(matches!(
            apply_override(&mut t, "model.lambda=1"),
            Err(ConfigError::KeyConflict { .. })
        ));
        let mut t = Table::new();
        apply_override(&mut t, "model.lamda=-1").unwrap();
        assert!(resolve(t).is_err());
        let mut t = Table::new();
        apply_override(&mut t, "grid.points=\"many\"").unwrap();
        assert!(resolve(t).is_err());
    }
}
