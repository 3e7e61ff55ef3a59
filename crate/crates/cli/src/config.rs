//! Setting resolution: command-line flag, then config file, then
//! `TRIAGE_*` environment variable, then the built-in default.

use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};
use triage_core::{Result, TriageError};

pub struct Settings {
    file: Map<String, Value>,
    resolved: Map<String, Value>,
}

fn env_name(key: &str) -> String {
    format!("TRIAGE_{}", key.to_ascii_uppercase().replace('-', "_"))
}

impl Settings {
    pub fn load(config: Option<&Path>) -> Result<Settings> {
        let file = match config {
            None => Map::new(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => TriageError::NotFound(path.into()),
                    _ => TriageError::InvalidSpec(format!("{}: {e}", path.display())),
                })?;
                match serde_json::from_str(&text) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => return Err(TriageError::InvalidSpec(format!("{}: expected a JSON object", path.display()))),
                    Err(e) => return Err(TriageError::InvalidSpec(format!("{}: {e}", path.display()))),
                }
            }
        };
        Ok(Settings { file, resolved: Map::new() })
    }

    /// Resolves `key`, records the value for the report echo and returns it.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + ToString,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.lookup(key)? {
                Some(v) => v,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), echo(&value.to_string()));
        Ok(value)
    }

    fn lookup<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let (raw, source) = if let Some(v) = self.file.get(key) {
            let raw = match v {
                Value::String(s) => s.clone(),
                Value::Array(items) => items
                    .iter()
                    .map(|i| i.as_str().map(String::from).unwrap_or_else(|| i.to_string()))
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            (raw, "config file".to_string())
        } else if let Ok(v) = std::env::var(env_name(key)) {
            (v, env_name(key))
        } else {
            return Ok(None);
        };
        raw.trim()
            .parse()
            .map(Some)
            .map_err(|_| TriageError::InvalidSpec(format!("{source}: invalid value {raw:?} for {key}")))
    }

    pub fn resolved(&self) -> Value {
        Value::Object(self.resolved.clone())
    }
}

fn echo(text: &str) -> Value {
    serde_json::from_str::<Value>(text)
        .ok()
        .filter(|v| v.is_number() || v.is_boolean())
        .unwrap_or_else(|| Value::String(text.to_string()))
}
