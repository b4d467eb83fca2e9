//! `--config` support: values from a TOML file become argument defaults, so
//! explicit flags still win and built-in defaults apply last.

use std::path::Path;

use clap::Command;
use srr_core::SrrError;

/// Applies the `[<subcommand>]` table of `path` as defaults on `cmd`.
pub fn apply_config(cmd: Command, path: &Path, subcommand: &str) -> Result<Command, SrrError> {
    let text = std::fs::read_to_string(path)?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| SrrError::Input(format!("config {}: {e}", path.display())))?;
    let mut errors = Vec::new();
    for key in table.keys() {
        let known = cmd.get_subcommands().any(|s| s.get_name() == key);
        if !known {
            errors.push(format!("unknown section [{key}]"));
        } else if !table[key].is_table() {
            errors.push(format!("'{key}' must be a table"));
        }
    }
    let section = table.get(subcommand).and_then(|v| v.as_table()).cloned().unwrap_or_default();
    let sub = cmd
        .find_subcommand(subcommand)
        .ok_or_else(|| SrrError::Input(format!("unknown subcommand '{subcommand}'")))?;
    let mut defaults = Vec::new();
    for (key, value) in &section {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) || a.get_id() == key.as_str());
        let Some(arg) = arg else {
            errors.push(format!("[{subcommand}] unknown key '{key}'"));
            continue;
        };
        if arg.get_id() == "config" {
            errors.push(format!("[{subcommand}] 'config' cannot be set from a config file"));
            continue;
        }
        match scalar(value) {
            Some(s) => defaults.push((arg.get_id().to_string(), s)),
            None => errors.push(format!("[{subcommand}] '{key}' must be a string, number or boolean")),
        }
    }
    if !errors.is_empty() {
        return Err(SrrError::Input(format!("config {}: {}", path.display(), errors.join("; "))));
    }
    Ok(cmd.mut_subcommand(subcommand, |mut sub| {
        for (id, value) in defaults {
            sub = sub.mut_arg(id, |a| a.default_value(value).required(false));
        }
        sub
    }))
}

fn scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}
