//! Configuration layering: file < environment < command-line overrides,
//! last wins. All layers funnel through one TOML table before
//! deserialization so precedence is uniform.

use std::path::Path;

use kzmsim_core::RunConfig;

use crate::CliError;

/// Top-level scalar keys that may be overridden via `KZMSIM_<KEY>`
/// environment variables (upper-cased key name).
const ENV_KEYS: &[&str] = &[
    "species",
    "n_ions",
    "omega_weak_hz",
    "anisotropy",
    "drive_hz",
    "rf_mode",
    "v_start",
    "v_end",
    "tau_us",
    "t0_us",
    "settle_us",
    "calibration_a",
];

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    match raw {
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => {
            // arrays and quoted strings: accept any TOML literal
            if let Ok(mut t) = toml::from_str::<toml::Table>(&format!("v = {raw}")) {
                if let Some(v) = t.remove("v") {
                    return v;
                }
            }
            toml::Value::String(raw.to_string())
        }
    }
}

/// Insert `key = value` into the table, where `key` may be dotted
/// (`cooling.friction_hz`).
fn insert_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(CliError::config(format!("empty key segment in '{key}'")));
        }
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::config(format!("key '{key}' descends into a non-table value"))
            })?;
    }
    unreachable!("split always yields at least one segment")
}

/// Assemble the effective configuration.
///
/// `sets` are `key=value` pairs from `--set`, applied last.
pub fn load_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut table: toml::Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::config(format!("cannot read config '{}': {e}", p.display()))
            })?;
            toml::from_str(&text).map_err(|e| {
                CliError::config(format!("config '{}' is not valid TOML: {e}", p.display()))
            })?
        }
        None => toml::Table::new(),
    };
    for key in ENV_KEYS {
        let var = format!("KZMSIM_{}", key.to_ascii_uppercase());
        if let Ok(raw) = std::env::var(&var) {
            insert_dotted(&mut table, key, parse_scalar(&raw))?;
        }
    }
    for pair in sets {
        let (key, raw) = pair.split_once('=').ok_or_else(|| {
            CliError::config(format!("--set expects key=value, got '{pair}'"))
        })?;
        insert_dotted(&mut table, key.trim(), parse_scalar(raw.trim()))?;
    }
    let text = toml::to_string(&table)
        .map_err(|e| CliError::config(format!("internal config assembly failure: {e}")))?;
    RunConfig::from_toml(&text).map_err(CliError::from_config_error)
}

/// Resolve the worker count: `--workers` flag beats `KZMSIM_WORKERS`,
/// which beats the rayon default (number of cores). Returns `None` when
/// unconstrained.
pub fn resolve_workers(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(w) = flag {
        if w == 0 {
            return Err(CliError::config("--workers must be at least 1"));
        }
        return Ok(Some(w));
    }
    match std::env::var("KZMSIM_WORKERS") {
        Ok(raw) => {
            let w: usize = raw
                .parse()
                .map_err(|_| CliError::config(format!("KZMSIM_WORKERS='{raw}' is not a count")))?;
            if w == 0 {
                return Err(CliError::config("KZMSIM_WORKERS must be at least 1"));
            }
            Ok(Some(w))
        }
        Err(_) => Ok(None),
    }
}
