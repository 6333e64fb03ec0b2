//! Flat JSON config files.
//!
//! A config file is a single JSON object of scalar values whose keys match
//! the long command-line flags (underscored). Command-line flags override
//! file values, which override built-in defaults. Unknown keys are
//! rejected so typos cannot silently fall back to defaults.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{Map, Value};

const KNOWN_KEYS: &[&str] = &[
    "vocab_size",
    "source_vocab_size",
    "max_piece_len",
    "iterations",
    "sub_iterations",
    "shrink_factor",
    "variant",
    "normalize_posterior",
    "restrict_denominator",
    "align_iterations",
    "renyi_alpha",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    values: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let Value::Object(values) = serde_json::from_str(&text)
            .with_context(|| format!("config file {} is not valid JSON", path.display()))?
        else {
            bail!("config file {} must hold a JSON object", path.display());
        };
        for key in values.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("config file {}: unknown key {key:?}", path.display());
            }
        }
        Ok(FileConfig { values })
    }

    fn get(&self, key: &str) -> Option<&Value> {
        debug_assert!(KNOWN_KEYS.contains(&key), "unlisted config key {key}");
        self.values.get(key)
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.as_u64()
                    .map(|n| n as usize)
                    .ok_or_else(|| anyhow!("config key {key:?} must be a nonnegative integer"))
            })
            .transpose()
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| anyhow!("config key {key:?} must be a number"))
            })
            .transpose()
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| {
                v.as_bool()
                    .ok_or_else(|| anyhow!("config key {key:?} must be a boolean"))
            })
            .transpose()
    }

    pub fn variant(&self) -> Result<Option<pairtok::trainer::Variant>> {
        self.get("variant")
            .map(|v| {
                serde_json::from_value(v.clone())
                    .map_err(|_| anyhow!("config key \"variant\" must be \"expected\" or \"hard_em\""))
            })
            .transpose()
    }
}

/// Command-line value, else config-file value, else the default.
pub fn resolve<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}
