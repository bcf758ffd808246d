//! Run configuration loaded from a TOML file. Every field has a default so a
//! minimal config only names the model.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use repomend_core::gateway::ModelPrices;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_model_name")]
    pub name: String,
    /// Environment variable holding the API key; the key itself never
    /// appears in config files.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_api_base")]
    pub api_base: String,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    /// Dollars per million tokens, keyed by model name.
    #[serde(default)]
    pub prices: BTreeMap<String, ModelPrices>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            name: default_model_name(),
            api_key_env: default_api_key_env(),
            api_base: default_api_base(),
            max_output_tokens: default_max_output_tokens(),
            prices: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_top_n_files")]
    pub top_n_files: usize,
    #[serde(default = "default_k_location_samples")]
    pub k_location_samples: u32,
    #[serde(default = "default_n_samples_per_set")]
    pub n_samples_per_set: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_context_pad")]
    pub context_pad: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            top_n_files: default_top_n_files(),
            k_location_samples: default_k_location_samples(),
            n_samples_per_set: default_n_samples_per_set(),
            temperature: default_temperature(),
            context_pad: default_context_pad(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_transcript_dir")]
    pub transcript_dir: String,
    #[serde(default = "default_test_timeout_seconds")]
    pub test_timeout_seconds: u64,
    #[serde(default)]
    pub dollar_cap: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            transcript_dir: default_transcript_dir(),
            test_timeout_seconds: default_test_timeout_seconds(),
            dollar_cap: None,
        }
    }
}

fn default_model_name() -> String {
    "gpt-4o-2024-05-13".to_string()
}
fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}
fn default_api_base() -> String {
    "https://api.openai.com/v1".to_string()
}
fn default_max_output_tokens() -> u32 {
    1024
}
fn default_top_n_files() -> usize {
    3
}
fn default_k_location_samples() -> u32 {
    4
}
fn default_n_samples_per_set() -> u32 {
    20
}
fn default_temperature() -> f64 {
    0.8
}
fn default_context_pad() -> usize {
    10
}
fn default_transcript_dir() -> String {
    "transcripts".to_string()
}
fn default_test_timeout_seconds() -> u64 {
    120
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Config =
            toml::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let config: Config = toml::from_str("").unwrap();
        assert_eq!(config.pipeline.top_n_files, 3);
        assert_eq!(config.pipeline.k_location_samples, 4);
        assert_eq!(config.pipeline.n_samples_per_set, 20);
        assert_eq!(config.pipeline.temperature, 0.8);
        assert_eq!(config.pipeline.context_pad, 10);
        assert_eq!(config.model.api_key_env, "OPENAI_API_KEY");
        assert!(config.run.dollar_cap.is_none());
    }

    #[test]
    fn partial_config_overrides_defaults() {
        let raw = "\
[model]
name = \"test-model\"

[model.prices.test-model]
input_per_mtok = 1.0
output_per_mtok = 2.0

[pipeline]
n_samples_per_set = 2

[run]
dollar_cap = 5.0
";
        let config: Config = toml::from_str(raw).unwrap();
        assert_eq!(config.model.name, "test-model");
        assert_eq!(config.pipeline.n_samples_per_set, 2);
        assert_eq!(config.pipeline.top_n_files, 3);
        assert_eq!(config.run.dollar_cap, Some(5.0));
        assert_eq!(config.model.prices["test-model"].output_per_mtok, 2.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<Config>("[pipeline]\ntypo_field = 1\n").is_err());
    }
}
