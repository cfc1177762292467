use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::gateway::{EndpointProfile, Gateway};
use crate::html::DedupConfig;
use crate::pipeline::PipelineThresholds;
use crate::runtime::ExecutionLimits;

/// Prefix of every environment variable the CLI reads.
pub const ENV_PREFIX: &str = "SCRIBE_FORGE_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeConfig {
    /// Command template with an `{adapter}` placeholder, e.g.
    /// `python3 -I {adapter}`.
    #[serde(default)]
    pub interpreter_command: Option<String>,
}

/// Everything a run needs, read from a TOML file, then environment
/// variables, then flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub profiles: BTreeMap<String, EndpointProfile>,
    #[serde(default)]
    pub runtime: RuntimeConfig,
    #[serde(default)]
    pub limits: ExecutionLimits,
    #[serde(default)]
    pub thresholds: PipelineThresholds,
    #[serde(default)]
    pub dedup: DedupConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Directory of `<template>.j2` overrides.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    /// Bound on concurrent model requests.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_concurrency() -> usize {
    8
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profiles: BTreeMap::new(),
            runtime: RuntimeConfig::default(),
            limits: ExecutionLimits::default(),
            thresholds: PipelineThresholds::default(),
            dedup: DedupConfig::default(),
            seed: 0,
            output_dir: default_output_dir(),
            templates_dir: None,
            concurrency: default_concurrency(),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{ENV_PREFIX}{name}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = resolve(base, &cfg.output_dir);
        cfg.templates_dir = cfg.templates_dir.map(|d| resolve(base, &d));
        for profile in cfg.profiles.values_mut() {
            profile.mock_file = profile.mock_file.take().map(|f| resolve(base, &f));
        }
        Ok(cfg)
    }

    /// Applies `SCRIBE_FORGE_*` overrides from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(name) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let v = v.as_ref();
            match name {
                "SEED" => self.seed = parse_env(name, v)?,
                "OUTPUT_DIR" => self.output_dir = PathBuf::from(v),
                "INTERPRETER" => self.runtime.interpreter_command = Some(v.to_string()),
                "WALL_TIMEOUT_SECS" => self.limits.wall_timeout_secs = parse_env(name, v)?,
                "MAX_OUTPUT_BYTES" => self.limits.max_output_bytes = parse_env(name, v)?,
                "WORKERS" => self.limits.workers = Some(parse_env(name, v)?),
                "CONCURRENCY" => self.concurrency = parse_env(name, v)?,
                "TEMPLATES_DIR" => self.templates_dir = Some(PathBuf::from(v)),
                "Z" => self.dedup.z = parse_env(name, v)?,
                _ => {}
            }
        }
        Ok(())
    }

    /// Checks every section before any stage runs.
    pub fn validate(&self) -> Result<(), CliError> {
        self.dedup.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.limits.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.thresholds.validate().map_err(|e| CliError::Config(e.to_string()))?;
        for (name, p) in &self.profiles {
            p.validate().map_err(|e| CliError::Config(format!("profile {name}: {e}")))?;
        }
        if self.concurrency == 0 {
            return Err(CliError::Config("concurrency must be positive".into()));
        }
        Ok(())
    }

    pub fn gateway(&self, name: &str) -> Result<Gateway, CliError> {
        let profile = self
            .profiles
            .get(name)
            .ok_or_else(|| CliError::Config(format!("no profile named {name:?}")))?;
        Gateway::new(profile.clone()).map_err(|e| CliError::Config(format!("profile {name}: {e}")))
    }

    pub fn interpreter(&self) -> Result<String, CliError> {
        self.runtime
            .interpreter_command
            .clone()
            .filter(|c| !c.trim().is_empty())
            .ok_or_else(|| CliError::Config("runtime.interpreter_command is not configured".into()))
    }
}
