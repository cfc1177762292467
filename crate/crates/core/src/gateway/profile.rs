use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Http,
    Mock,
}

/// Connection settings for one model endpoint. The credential itself never
/// lives here: `auth_env` names the environment variable that holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointProfile {
    #[serde(default)]
    pub base_url: String,
    #[serde(default)]
    pub model_name: String,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    pub transport: TransportKind,
    /// Rules file for the mock transport (JSONL of `{match, response}`).
    #[serde(default)]
    pub mock_file: Option<PathBuf>,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

fn default_max_tokens() -> u32 {
    4096
}
fn default_timeout_secs() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_max_in_flight() -> usize {
    8
}

impl EndpointProfile {
    pub fn mock_profile() -> Self {
        EndpointProfile {
            base_url: String::new(),
            model_name: "mock".into(),
            auth_env: None,
            max_tokens: default_max_tokens(),
            temperature: 0.0,
            timeout_secs: default_timeout_secs(),
            transport: TransportKind::Mock,
            mock_file: None,
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn http(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        EndpointProfile {
            base_url: base_url.into(),
            model_name: model_name.into(),
            transport: TransportKind::Http,
            ..Self::mock_profile()
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.transport {
            TransportKind::Http if self.base_url.is_empty() => {
                Err(GatewayError::InvalidProfile("http transport needs base_url".into()))
            }
            TransportKind::Mock if self.mock_file.is_none() => Err(
                GatewayError::InvalidProfile("mock transport needs mock_file".into()),
            ),
            _ if self.timeout_secs == 0 => Err(GatewayError::InvalidProfile("timeout_secs must be positive".into())),
            _ => Ok(()),
        }
    }

    /// Resolves the bearer token, failing before any network call when the
    /// declared variable is unset.
    pub fn credential(&self) -> Result<Option<String>, GatewayError> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .ok()
                .filter(|v| !v.is_empty())
                .map(Some)
                .ok_or_else(|| GatewayError::AuthFailure(format!("environment variable {var} is not set"))),
        }
    }
}
