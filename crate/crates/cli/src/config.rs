//! Provider and run settings: TOML file layered over environment variables.

use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use hetvd_core::provider::{HttpConfig, PricingModel};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default)]
    pub providers: ProvidersSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersSection {
    #[serde(default)]
    pub expert: ProviderSettings,
    #[serde(default)]
    pub verifier: ProviderSettings,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSettings {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    /// Name of the environment variable holding the key.
    pub api_key_env: Option<String>,
    pub input_rate: Option<f64>,
    pub output_rate: Option<f64>,
    pub local: Option<bool>,
    pub timeout_seconds: Option<u64>,
    pub max_retries: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: Option<String>,
    pub sample_concurrency: Option<usize>,
    pub vote_rule: Option<String>,
    pub cache_dir: Option<String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e.message().replace('\n', " ")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Expert,
    Verifier,
}

impl Side {
    fn env_prefix(self) -> &'static str {
        match self {
            Side::Expert => "HETVD_EXPERT",
            Side::Verifier => "HETVD_VERIFIER",
        }
    }
}

/// Settings for one provider after merging the config file with the
/// environment (the file wins).
#[derive(Debug, Clone)]
pub struct ResolvedProvider {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub pricing: PricingModel,
    pub local: bool,
    pub timeout: Duration,
    pub max_retries: u32,
}

pub fn resolve(
    side: Side,
    file: &ProviderSettings,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<ResolvedProvider> {
    let prefix = side.env_prefix();
    let from_env = |suffix: &str| env(&format!("{prefix}_{suffix}")).filter(|v| !v.is_empty());
    let api_key = match (&file.api_key, &file.api_key_env) {
        (Some(k), _) => Some(k.clone()),
        (None, Some(var)) => env(var).filter(|v| !v.is_empty()),
        (None, None) => from_env("API_KEY"),
    };
    let local = file.local.unwrap_or(side == Side::Verifier);
    let default_pricing = if local {
        PricingModel::FREE
    } else {
        PricingModel::DEEPSEEK_V3
    };
    let pricing = PricingModel::new(
        file.input_rate.unwrap_or(default_pricing.input_rate),
        file.output_rate.unwrap_or(default_pricing.output_rate),
    )?;
    Ok(ResolvedProvider {
        endpoint: file.endpoint.clone().or_else(|| from_env("ENDPOINT")),
        model: file.model.clone().or_else(|| from_env("MODEL")),
        api_key,
        pricing,
        local,
        timeout: Duration::from_secs(file.timeout_seconds.unwrap_or(120)),
        max_retries: file.max_retries.unwrap_or(3),
    })
}

impl ResolvedProvider {
    pub fn http_config(&self, side: Side) -> Result<HttpConfig> {
        let Some(endpoint) = &self.endpoint else {
            bail!(
                "no {} endpoint: set it in the config file or {}_ENDPOINT",
                if side == Side::Expert {
                    "expert"
                } else {
                    "verifier"
                },
                side.env_prefix()
            );
        };
        let mut config = HttpConfig::new(endpoint.clone());
        config.api_key = self.api_key.clone();
        config.timeout = self.timeout;
        config.max_retries = self.max_retries;
        Ok(config)
    }
}
