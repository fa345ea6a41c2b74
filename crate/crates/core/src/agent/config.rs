//! Runtime configuration file.
//!
//! ```json
//! {
//!   "llm": {"endpoint": "http://127.0.0.1:8000/v1/chat/completions", "model": "some-model"},
//!   "genui": {"endpoint": "http://127.0.0.1:8000/v1/chat/completions", "model": "some-model"},
//!   "limits": {"max_steps": 30},
//!   "overlay": {"port": 8765}
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

/// Environment variable holding the model API key unless `key_env` says
/// otherwise.
pub const DEFAULT_KEY_ENV: &str = "VDAGENT_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub key_env: String,
}

fn default_key_env() -> String {
    DEFAULT_KEY_ENV.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenUiConfig {
    pub endpoint: String,
    pub model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub max_steps: u64,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        LimitsConfig { max_steps: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlayConfig {
    pub port: u16,
}

impl Default for OverlayConfig {
    fn default() -> Self {
        OverlayConfig { port: 8765 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub llm: Option<LlmConfig>,
    #[serde(default)]
    pub genui: Option<GenUiConfig>,
    #[serde(default)]
    pub limits: LimitsConfig,
    #[serde(default)]
    pub overlay: OverlayConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
