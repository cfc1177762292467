//! Offline transports: substring-rule mocks and fixed response queues.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatExchange, ChatModel, EndpointProfile, GatewayError, RawReply, Transport};

/// One line of a mock rules file. The first rule whose `match` occurs in the
/// prompt answers it; an empty `match` matches everything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub pattern: String,
    pub response: String,
}

impl MockRule {
    pub fn new(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        MockRule {
            pattern: pattern.into(),
            response: response.into(),
        }
    }
}

pub fn load_rules(path: &Path) -> Result<Vec<MockRule>, GatewayError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GatewayError::MockRules(format!("{}: {e}", path.display())))?;
    parse_rules(&text)
}

pub fn parse_rules(jsonl: &str) -> Result<Vec<MockRule>, GatewayError> {
    jsonl
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| GatewayError::MockRules(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Debug)]
pub(crate) struct MockTransport {
    rules: Vec<MockRule>,
}

impl MockTransport {
    pub(crate) fn new(rules: Vec<MockRule>) -> Self {
        MockTransport { rules }
    }

    pub(crate) fn from_file(path: &Path) -> Result<Self, GatewayError> {
        Ok(Self::new(load_rules(path)?))
    }
}

impl Transport for MockTransport {
    fn send(&self, _: &EndpointProfile, prompt: &str) -> Result<RawReply, GatewayError> {
        self.rules
            .iter()
            .find(|r| prompt.contains(&r.pattern))
            .map(|r| RawReply {
                text: r.response.clone(),
                usage: None,
            })
            .ok_or(GatewayError::NoMockMatch)
    }
}

/// Answers prompts with queued responses in order, recording every prompt.
/// An `Err` entry simulates a transport failure for that call.
#[derive(Debug, Default)]
pub struct ScriptedModel {
    queue: Mutex<VecDeque<Result<String, GatewayError>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedModel {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_results(responses.into_iter().map(|s| Ok(s.into())))
    }

    pub fn with_results(results: impl IntoIterator<Item = Result<String, GatewayError>>) -> Self {
        ScriptedModel {
            queue: Mutex::new(results.into_iter().collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl ChatModel for ScriptedModel {
    fn complete(&self, prompt: &str) -> Result<ChatExchange, GatewayError> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        let next = self
            .queue
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(GatewayError::EndpointUnavailable("script exhausted".into())))?;
        Ok(ChatExchange {
            rendered_prompt: prompt.to_string(),
            response_text: next,
            latency: Duration::ZERO,
            token_usage: None,
        })
    }
}
