use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::HtmlError;

pub const DEFAULT_COUNTER: &str = "chars4";

pub trait TokenCounter: Send + Sync {
    fn id(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// `ceil(chars / 4)`, a tokenizer-free approximation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharsPerToken;

impl TokenCounter for CharsPerToken {
    fn id(&self) -> &str {
        DEFAULT_COUNTER
    }

    fn count(&self, text: &str) -> usize {
        text.chars().count().div_ceil(4)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCount {
    pub count: usize,
    pub counter_id: String,
}

#[derive(Clone)]
pub struct CounterRegistry {
    counters: BTreeMap<String, Arc<dyn TokenCounter>>,
}

impl Default for CounterRegistry {
    fn default() -> Self {
        let mut r = CounterRegistry {
            counters: BTreeMap::new(),
        };
        r.register(Arc::new(CharsPerToken));
        r
    }
}

impl CounterRegistry {
    pub fn register(&mut self, counter: Arc<dyn TokenCounter>) {
        self.counters.insert(counter.id().to_string(), counter);
    }

    pub fn get(&self, id: &str) -> Option<&Arc<dyn TokenCounter>> {
        self.counters.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.counters.keys().map(String::as_str)
    }
}

pub fn count_tokens(
    text: &str,
    registry: &CounterRegistry,
    counter: &str,
) -> Result<TokenCount, HtmlError> {
    let c = registry
        .get(counter)
        .ok_or_else(|| HtmlError::UnknownCounter(counter.to_string()))?;
    Ok(TokenCount {
        count: c.count(text),
        counter_id: c.id().to_string(),
    })
}
