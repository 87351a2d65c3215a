//! Values from a `--config` JSON file, merged under command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::{usage, CliError, CliResult};

#[derive(Debug, Default, Clone)]
pub struct FileConfig(Map<String, Value>);

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(map)) => Ok(Self(map)),
            Ok(_) => usage(format!("{}: config must be a JSON object", path.display())),
            Err(e) => usage(format!("{}: {e}", path.display())),
        }
    }

    pub fn from_map(map: Map<String, Value>) -> Self {
        Self(map)
    }

    /// The value under `key`, also accepting the dashed spelling.
    pub fn get<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        let dashed = key.replace('_', "-");
        let Some(v) = self.0.get(key).or_else(|| self.0.get(&dashed)) else {
            return Ok(None);
        };
        serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))
    }

    /// `flag` if given, else the config value.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Like `pick`, for list flags where empty means unset.
    pub fn pick_list<T: DeserializeOwned>(&self, flag: Vec<T>, key: &str) -> CliResult<Vec<T>> {
        if !flag.is_empty() {
            return Ok(flag);
        }
        Ok(self.get(key)?.unwrap_or_default())
    }

    pub fn pick_flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.get::<bool>(key)?.unwrap_or(false))
    }
}
