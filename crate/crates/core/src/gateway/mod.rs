//! Prompt rendering and chat-completion exchange with configured endpoints.
//!
//! Every model the rest of the crate talks to is a [`ChatModel`]. The
//! [`Gateway`] implementation wraps an [`EndpointProfile`] and one of two
//! transports: an OpenAI-style HTTP chat-completions client or a scripted
//! mock that answers from a rules file, so every stage runs offline.

mod judge;
pub mod mock;
pub mod parse;
mod profile;
pub mod templates;
mod transport;

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::html::{CharsPerToken, TokenCounter};

pub use judge::LlmJudge;
pub use mock::{load_rules, parse_rules, MockRule, ScriptedModel};
pub use parse::{
    parse_binary, parse_classifier, parse_triples_literal, ClassifierVerdict, Decision, LiteralTriples,
};
pub use profile::{EndpointProfile, TransportKind};
pub use templates::{classifier_example_vars, render, vars, PromptTemplate, TemplateName, TemplateSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("request timed out")]
    Timeout,
    #[error("missing template variable `{0}`")]
    MissingVariable(String),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("unparseable verdict: {0:?}")]
    UnparseableVerdict(String),
    #[error("no list literal found in response")]
    NoLiteralFound,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("mock rules: {0}")]
    MockRules(String),
    #[error("no mock rule matches the prompt")]
    NoMockMatch,
}

impl GatewayError {
    fn is_transient(&self) -> bool {
        matches!(self, GatewayError::EndpointUnavailable(_) | GatewayError::Timeout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: usize,
    pub completion: usize,
    /// False when counts were estimated locally rather than reported.
    pub reported: bool,
}

/// One prompt/response round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub rendered_prompt: String,
    pub response_text: String,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
    pub token_usage: Option<TokenUsage>,
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// A language model reachable through some transport.
pub trait ChatModel: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<ChatExchange, GatewayError>;
}

impl<M: ChatModel + ?Sized> ChatModel for &M {
    fn complete(&self, prompt: &str) -> Result<ChatExchange, GatewayError> {
        (**self).complete(prompt)
    }
}

impl<M: ChatModel + ?Sized> ChatModel for std::sync::Arc<M> {
    fn complete(&self, prompt: &str) -> Result<ChatExchange, GatewayError> {
        (**self).complete(prompt)
    }
}

/// Raw text reply from a transport.
#[derive(Debug, Clone)]
pub(crate) struct RawReply {
    text: String,
    usage: Option<(usize, usize)>,
}

pub(crate) trait Transport: Send + Sync {
    fn send(&self, profile: &EndpointProfile, prompt: &str) -> Result<RawReply, GatewayError>;
}

struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.active.lock().unwrap();
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// A profile bound to its transport. Shareable across threads; the number of
/// concurrent requests is capped by the profile's `max_in_flight`.
pub struct Gateway {
    profile: EndpointProfile,
    transport: Box<dyn Transport>,
    in_flight: InFlight,
    log: Mutex<Vec<ChatExchange>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("profile", &self.profile).finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(profile: EndpointProfile) -> Result<Self, GatewayError> {
        profile.validate()?;
        let transport: Box<dyn Transport> = match profile.transport {
            TransportKind::Http => Box::new(transport::HttpTransport::new(&profile)?),
            TransportKind::Mock => {
                let path = profile
                    .mock_file
                    .as_ref()
                    .ok_or_else(|| GatewayError::InvalidProfile("mock transport needs mock_file".into()))?;
                Box::new(mock::MockTransport::from_file(path)?)
            }
        };
        Ok(Self::with_transport(profile, transport))
    }

    pub(crate) fn with_transport(profile: EndpointProfile, transport: Box<dyn Transport>) -> Self {
        Gateway {
            in_flight: InFlight {
                limit: profile.max_in_flight.max(1),
                active: Mutex::new(0),
                freed: Condvar::new(),
            },
            profile,
            transport,
            log: Mutex::new(Vec::new()),
        }
    }

    /// A mock-backed gateway built from in-memory rules.
    pub fn mock(rules: Vec<MockRule>) -> Self {
        let profile = EndpointProfile::mock_profile();
        Self::with_transport(profile, Box::new(mock::MockTransport::new(rules)))
    }

    pub fn profile(&self) -> &EndpointProfile {
        &self.profile
    }

    /// Snapshot of every exchange so far, in completion order.
    pub fn exchanges(&self) -> Vec<ChatExchange> {
        self.log.lock().unwrap().clone()
    }
}

impl ChatModel for Gateway {
    fn complete(&self, prompt: &str) -> Result<ChatExchange, GatewayError> {
        let _slot = self.in_flight.acquire();
        let attempts = self.profile.retries.max(1);
        let mut delay = Duration::from_millis(self.profile.backoff_ms);
        let mut attempt = 1;
        loop {
            let started = Instant::now();
            match self.transport.send(&self.profile, prompt) {
                Ok(reply) => {
                    let counter = CharsPerToken;
                    let token_usage = Some(match reply.usage {
                        Some((prompt, completion)) => TokenUsage {
                            prompt,
                            completion,
                            reported: true,
                        },
                        None => TokenUsage {
                            prompt: counter.count(prompt),
                            completion: counter.count(&reply.text),
                            reported: false,
                        },
                    });
                    let exchange = ChatExchange {
                        rendered_prompt: prompt.to_string(),
                        response_text: reply.text,
                        latency: started.elapsed(),
                        token_usage,
                    };
                    self.log.lock().unwrap().push(exchange.clone());
                    return Ok(exchange);
                }
                Err(e) if e.is_transient() && attempt < attempts => {
                    log::warn!("attempt {attempt}/{attempts} failed: {e}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
