//! Run configuration: a flat `key = value` file mirrored by CLI flags,
//! flags taking precedence.
//!
//! ```text
//! # platefuse config
//! epsilon = 0.5
//! epsilon_mode = relative
//! min_hits = 2
//! layout = AAANNNN
//! enable_rotation = true
//! gamma_tilt_noise = 1.0
//! seed = 42
//! strict = true
//! ```

use platefuse_core::ctm::{CtmConfig, EpsilonPolicy};
use platefuse_core::layout::{LayoutError, LayoutSpec};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config line {line}: expected `key = value`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("config line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for {key}: {value:?}")]
    InvalidValue { key: &'static str, value: String },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("epsilon_mode = absolute requires an epsilon value in pixels")]
    MissingAbsoluteEpsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonMode {
    Absolute,
    Relative,
}

/// Partial settings; unset keys fall back to defaults at use time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub epsilon: Option<f64>,
    pub epsilon_mode: Option<EpsilonMode>,
    pub min_hits: Option<usize>,
    pub layout: Option<String>,
    pub enable_rotation: Option<bool>,
    pub gamma_tilt_noise: Option<f64>,
    pub seed: Option<u64>,
    pub strict: Option<bool>,
}

fn parse_bool(key: &'static str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key,
            value: value.to_string(),
        }),
    }
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut settings = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or(ConfigError::Malformed {
                line,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |k: &'static str| ConfigError::InvalidValue {
                key: k,
                value: value.to_string(),
            };
            match key {
                "epsilon" => settings.epsilon = Some(value.parse().map_err(|_| bad("epsilon"))?),
                "epsilon_mode" => {
                    settings.epsilon_mode = Some(match value {
                        "absolute" => EpsilonMode::Absolute,
                        "relative" => EpsilonMode::Relative,
                        _ => return Err(bad("epsilon_mode")),
                    })
                }
                "min_hits" => settings.min_hits = Some(value.parse().map_err(|_| bad("min_hits"))?),
                "layout" => settings.layout = Some(value.to_string()),
                "enable_rotation" => {
                    settings.enable_rotation = Some(parse_bool("enable_rotation", value)?)
                }
                "gamma_tilt_noise" => {
                    settings.gamma_tilt_noise =
                        Some(value.parse().map_err(|_| bad("gamma_tilt_noise"))?)
                }
                "seed" => settings.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "strict" => settings.strict = Some(parse_bool("strict", value)?),
                other => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: other.to_string(),
                    })
                }
            }
        }
        Ok(settings)
    }

    /// Overlays `overrides` (typically CLI flags) on top of these settings.
    pub fn merged_with(&self, overrides: &Settings) -> Settings {
        Settings {
            epsilon: overrides.epsilon.or(self.epsilon),
            epsilon_mode: overrides.epsilon_mode.or(self.epsilon_mode),
            min_hits: overrides.min_hits.or(self.min_hits),
            layout: overrides.layout.clone().or_else(|| self.layout.clone()),
            enable_rotation: overrides.enable_rotation.or(self.enable_rotation),
            gamma_tilt_noise: overrides.gamma_tilt_noise.or(self.gamma_tilt_noise),
            seed: overrides.seed.or(self.seed),
            strict: overrides.strict.or(self.strict),
        }
    }

    pub fn layout_spec(&self) -> Result<LayoutSpec, ConfigError> {
        Ok(match &self.layout {
            Some(pattern) => LayoutSpec::parse(pattern)?,
            None => LayoutSpec::default(),
        })
    }

    pub fn ctm_config(&self) -> Result<CtmConfig, ConfigError> {
        let epsilon = match self.epsilon_mode.unwrap_or(EpsilonMode::Relative) {
            EpsilonMode::Absolute => {
                EpsilonPolicy::Absolute(self.epsilon.ok_or(ConfigError::MissingAbsoluteEpsilon)?)
            }
            EpsilonMode::Relative => EpsilonPolicy::RelativeToWidth(self.epsilon.unwrap_or(0.5)),
        };
        Ok(CtmConfig {
            epsilon,
            min_hits: self.min_hits.unwrap_or(2),
            layout: self.layout_spec()?,
            enable_rotation: self.enable_rotation.unwrap_or(true),
            ..CtmConfig::default()
        })
    }

    pub fn strict(&self) -> bool {
        self.strict.unwrap_or(true)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_tilt_noise.unwrap_or(1.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }
}
