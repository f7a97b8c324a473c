//! `key = value` model configuration.

use std::fmt;

use kpp_core::model::{Nonlinearity, DEFAULT_ALPHA, DEFAULT_BETA};

pub const KEYS: [&str; 6] = ["nonlinearity", "beta", "alpha", "domain_left", "domain_right", "grid_step"];

#[derive(Debug, PartialEq)]
pub enum ConfigError {
    UnknownKey { line: usize, key: String },
    Malformed { line: usize, text: String },
    BadValue { key: String, value: String, reason: String },
    Duplicate { line: usize, key: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownKey { line, key } => write!(f, "line {line}: unknown key `{key}` (expected one of {})", KEYS.join(", ")),
            Self::Malformed { line, text } => write!(f, "line {line}: expected `key = value`, got `{text}`"),
            Self::BadValue { key, value, reason } => write!(f, "key `{key}`: invalid value `{value}`: {reason}"),
            Self::Duplicate { line, key } => write!(f, "line {line}: key `{key}` given twice"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub nonlinearity: Nonlinearity<f64>,
    pub beta: f64,
    pub alpha: f64,
    pub domain_left: f64,
    pub domain_right: f64,
    pub grid_step: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            nonlinearity: Nonlinearity::Kpp,
            beta: DEFAULT_BETA,
            alpha: DEFAULT_ALPHA,
            domain_left: -60.0,
            domain_right: 60.0,
            grid_step: 0.02,
        }
    }
}

fn number(key: &str, value: &str) -> Result<f64, ConfigError> {
    let bad = |reason: &str| ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.into() };
    let v: f64 = value.parse().map_err(|_| bad("not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad("not finite"))
    }
}

impl ModelConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Malformed { line, text: body.into() });
            };
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line, key },
                e => e,
            })?;
            if seen.iter().any(|s| s == key) {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
            seen.push(key.into());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "nonlinearity" => {
                self.nonlinearity = Nonlinearity::parse(value).map_err(|e| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                    reason: e.to_string(),
                })?
            }
            "beta" => self.beta = number(key, value)?,
            "alpha" => self.alpha = number(key, value)?,
            "domain_left" => self.domain_left = number(key, value)?,
            "domain_right" => self.domain_right = number(key, value)?,
            "grid_step" => self.grid_step = number(key, value)?,
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.into() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, value: f64, reason: &str| ConfigError::BadValue {
            key: key.into(),
            value: value.to_string(),
            reason: reason.into(),
        };
        if !(self.domain_left < 0.0 && self.domain_right > 0.0) {
            return Err(bad("domain_left", self.domain_left, "domain must contain 0"));
        }
        if !(self.grid_step > 0.0 && self.grid_step < (self.domain_right - self.domain_left) / 10.0) {
            return Err(bad("grid_step", self.grid_step, "must be positive and resolve the domain"));
        }
        Ok(())
    }

    /// `(key, value)` pairs in canonical order, for reproducibility headers.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        vec![
            ("nonlinearity", self.nonlinearity.name()),
            ("beta", self.beta.to_string()),
            ("alpha", self.alpha.to_string()),
            ("domain_left", self.domain_left.to_string()),
            ("domain_right", self.domain_right.to_string()),
            ("grid_step", self.grid_step.to_string()),
        ]
    }
}
