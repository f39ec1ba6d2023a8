//! `key = value` configuration files with total up-front validation.
//!
//! Every command declares its allowed keys; unknown keys, bad values, and
//! out-of-range settings are rejected before any work starts.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn empty() -> ConfigMap {
        ConfigMap::default()
    }

    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// ignored.
    pub fn from_file(path: &Path) -> Result<ConfigMap, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    idx + 1
                ))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Config(format!(
                    "{}:{}: empty key",
                    path.display(),
                    idx + 1
                )));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!(
                    "{}:{}: duplicate key {key:?}",
                    path.display(),
                    idx + 1
                )));
            }
        }
        Ok(ConfigMap { values })
    }

    pub fn load(path: Option<&Path>) -> Result<ConfigMap, CliError> {
        match path {
            Some(p) => ConfigMap::from_file(p),
            None => Ok(ConfigMap::empty()),
        }
    }

    /// Rejects any key outside the command's schema.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown key {key:?} (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn require_str(&self, key: &str) -> Result<String, CliError> {
        self.raw(key)
            .map(str::to_string)
            .ok_or_else(|| CliError::Config(format!("missing required key {key:?}")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, value: &str) -> Result<T, CliError> {
        value
            .parse::<T>()
            .map_err(|_| CliError::Config(format!("bad value for {key:?}: {value:?}")))
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => self.parse(key, v),
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => self.parse(key, v),
        }
    }

    pub fn get_f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => Ok(Some(self.parse(key, v)?)),
        }
    }

    /// Comma-separated list of floats.
    pub fn get_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|t| self.parse(key, t.trim()))
                .collect(),
        }
    }

    /// Comma-separated list of strings.
    pub fn get_str_list(&self, key: &str, default: &[&str]) -> Vec<String> {
        match self.raw(key) {
            None => default.iter().map(|s| s.to_string()).collect(),
            Some(v) => v.split(',').map(|t| t.trim().to_string()).collect(),
        }
    }

    /// FNV-1a hash of the canonical (sorted) key=value serialization; stamped
    /// into report headers for provenance.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (k, v) in &self.values {
            for byte in k.bytes().chain(*b"=").chain(v.bytes()).chain(*b"\n") {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

/// Training keys shared by every experiment command.
pub const TRAIN_KEYS: [&str; 5] = [
    "epochs",
    "batch_size",
    "learning_rate",
    "momentum",
    "lr_decay",
];

pub fn train_config(cfg: &ConfigMap) -> Result<pointens::models::TrainConfig, CliError> {
    let defaults = pointens::models::TrainConfig::default();
    let epochs = cfg.get_usize("epochs", defaults.epochs)?;
    let batch_size = cfg.get_usize("batch_size", defaults.batch_size)?;
    let learning_rate = cfg.get_f64("learning_rate", defaults.learning_rate)?;
    let momentum = cfg.get_f64("momentum", defaults.momentum)?;
    let lr_decay = cfg.get_f64("lr_decay", defaults.lr_decay)?;
    if epochs == 0 {
        return Err(CliError::Config("epochs must be at least 1".into()));
    }
    if batch_size == 0 {
        return Err(CliError::Config("batch_size must be at least 1".into()));
    }
    if learning_rate <= 0.0 {
        return Err(CliError::Config(format!(
            "learning_rate must be positive, got {learning_rate}"
        )));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(CliError::Config(format!(
            "momentum must be in [0, 1), got {momentum}"
        )));
    }
    if lr_decay <= 0.0 || lr_decay > 1.0 {
        return Err(CliError::Config(format!(
            "lr_decay must be in (0, 1], got {lr_decay}"
        )));
    }
    Ok(pointens::models::TrainConfig {
        epochs,
        batch_size,
        learning_rate,
        momentum,
        lr_decay,
        ..defaults
    })
}
