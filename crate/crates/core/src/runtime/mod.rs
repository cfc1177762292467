//! Runs extraction scripts in child processes.
//!
//! A script is source text defining `main(html)` that returns a list of
//! `(subject, predicate, object)` tuples. The harness writes the script, the
//! page and a small adapter into a fresh temporary directory, starts the
//! configured interpreter on the adapter in its own process group, and reads
//! back one JSON line from stdout. Isolation stops at the temporary directory
//! and the kill-on-timeout; anything stronger (containers, seccomp, network
//! namespaces) belongs in the interpreter command.

mod agentic;
mod exec;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::html::RawHtmlDocument;

pub use agentic::{
    agentic_generate, extract_code, render_feedback, triples_literal, Attempt, GenerateConfig,
    RetryTranscript, Shot, TriplesHint,
};
pub use exec::{
    classify, execute_script, parse_output, ExecutionResult, ExecutionStatus, Observation, OutputParse,
    STDERR_TAIL_BYTES,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("no interpreter command configured")]
    InterpreterNotConfigured,
    #[error("interpreter command lacks the {{adapter}} placeholder: {0}")]
    InvalidInterpreter(String),
    #[error("failed to start script: {0}")]
    SpawnFailure(String),
    #[error("group has no pages")]
    EmptyGroup,
    #[error("script source is empty")]
    EmptySource,
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionScript {
    pub id: String,
    pub source: String,
    /// Command template; `{adapter}` is replaced by the adapter path and the
    /// script and page paths are appended. Tokens split on whitespace.
    #[serde(default)]
    pub interpreter: String,
    /// Page the script was generated from.
    #[serde(default)]
    pub created_from: String,
}

impl ExtractionScript {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        interpreter: impl Into<String>,
        created_from: impl Into<String>,
    ) -> Result<Self, RuntimeError> {
        let source = source.into();
        if source.trim().is_empty() {
            return Err(RuntimeError::EmptySource);
        }
        Ok(ExtractionScript {
            id: id.into(),
            source,
            interpreter: interpreter.into(),
            created_from: created_from.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionLimits {
    #[serde(default = "default_wall_timeout_secs")]
    pub wall_timeout_secs: f64,
    #[serde(default = "default_max_output_bytes")]
    pub max_output_bytes: usize,
    /// Concurrent executions; defaults to the number of logical CPUs.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_wall_timeout_secs() -> f64 {
    30.0
}

fn default_max_output_bytes() -> usize {
    16 * 1024 * 1024
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        ExecutionLimits {
            wall_timeout_secs: default_wall_timeout_secs(),
            max_output_bytes: default_max_output_bytes(),
            workers: None,
        }
    }
}

impl ExecutionLimits {
    pub fn with_timeout(wall_timeout: Duration) -> Self {
        ExecutionLimits {
            wall_timeout_secs: wall_timeout.as_secs_f64(),
            ..Self::default()
        }
    }

    pub fn wall_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.wall_timeout_secs)
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        if !(self.wall_timeout_secs.is_finite() && self.wall_timeout_secs > 0.0) {
            return Err(RuntimeError::InvalidLimits("wall_timeout_secs must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(RuntimeError::InvalidLimits("workers must be positive".into()));
        }
        Ok(())
    }
}

/// Runs `script` on every page independently on a bounded pool. A failure
/// on one page never affects the others; results are keyed by page URL.
pub fn apply_to_group(
    script: &ExtractionScript,
    pages: &[RawHtmlDocument],
    limits: &ExecutionLimits,
) -> Result<BTreeMap<String, ExecutionResult>, RuntimeError> {
    if pages.is_empty() {
        return Err(RuntimeError::EmptyGroup);
    }
    limits.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(limits.workers())
        .build()
        .map_err(|e| RuntimeError::SpawnFailure(e.to_string()))?;
    let results: Vec<(String, Result<ExecutionResult, RuntimeError>)> = pool.install(|| {
        use rayon::prelude::*;
        pages
            .par_iter()
            .map(|p| (p.url.clone(), execute_script(script, p, limits)))
            .collect()
    });
    let mut out = BTreeMap::new();
    for (url, res) in results {
        match res {
            Ok(r) => {
                out.insert(url, r);
            }
            Err(e @ (RuntimeError::InterpreterNotConfigured | RuntimeError::InvalidInterpreter(_))) => return Err(e),
            Err(e) => {
                out.insert(url, ExecutionResult::failed(ExecutionStatus::Error, e.to_string()));
            }
        }
    }
    Ok(out)
}
