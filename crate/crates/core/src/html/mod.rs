//! HTML parsing, keep-z deduplication, flattening and token accounting.

pub mod dedup;
pub mod dom;
pub mod parser;
mod tokens;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dedup::{dedup_html, dedup_tree, parse_marker, DedupConfig, SiblingSignature};
pub use dom::DomTree;
pub use tokens::{count_tokens, CharsPerToken, CounterRegistry, TokenCount, TokenCounter, DEFAULT_COUNTER};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HtmlError {
    #[error("document could not be parsed")]
    ParseFailure,
    #[error("unknown token counter `{0}`")]
    UnknownCounter(String),
    #[error("invalid dedup config: {0}")]
    InvalidConfig(String),
}

/// A fetched page as it enters the system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHtmlDocument {
    pub url: String,
    pub html: String,
    #[serde(default)]
    pub title: Option<String>,
}

impl RawHtmlDocument {
    pub fn new(url: impl Into<String>, html: impl Into<String>) -> Self {
        RawHtmlDocument {
            url: url.into(),
            html: html.into(),
            title: None,
        }
    }

    /// Builds a document from raw bytes, replacing invalid UTF-8.
    pub fn from_bytes(url: impl Into<String>, bytes: &[u8]) -> Self {
        Self::new(url, String::from_utf8_lossy(bytes).into_owned())
    }

    /// Explicit title, else the text of the first `<title>` element.
    pub fn resolved_title(&self) -> Option<String> {
        if self.title.is_some() {
            return self.title.clone();
        }
        let tree = parse_html(self).ok()?;
        let id = tree.find_first("title")?;
        let text = dedup::collapse_whitespace(&decode_entities(&tree.text_content(id)));
        let text = text.trim();
        (!text.is_empty()).then(|| text.to_string())
    }
}

/// Parses a page leniently. Only empty or all-whitespace input is a failure;
/// callers then pass the raw string through unchanged.
pub fn parse_html(raw: &RawHtmlDocument) -> Result<DomTree, HtmlError> {
    if raw.html.trim().is_empty() {
        return Err(HtmlError::ParseFailure);
    }
    Ok(parser::build_tree(&raw.html))
}

impl DedupConfig {
    pub fn validate(&self) -> Result<(), HtmlError> {
        if self.z == 0 {
            return Err(HtmlError::InvalidConfig("z must be at least 1".into()));
        }
        Ok(())
    }
}

const FLATTEN_SKIP: &[&str] = &["script", "style", "noscript", "template"];

pub fn decode_entities(s: &str) -> String {
    html_escape::decode_html_entities(s).into_owned()
}

static TAG_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>?").unwrap());

/// Markup-free text of a page: text nodes in document order joined by single
/// spaces, entities decoded, script/style/noscript content dropped.
pub fn flatten_html(raw: &RawHtmlDocument) -> String {
    let tree = match parse_html(raw) {
        Ok(t) => t,
        Err(_) => {
            let stripped = TAG_RUN.replace_all(&raw.html, " ");
            return dedup::collapse_whitespace(&stripped).trim().to_string();
        }
    };
    let mut pieces: Vec<String> = Vec::new();
    let mut stack = vec![DomTree::ROOT];
    while let Some(id) = stack.pop() {
        match &tree.node(id).kind {
            dom::NodeKind::Text(t) => pieces.push(decode_entities(t)),
            dom::NodeKind::Element(e) if FLATTEN_SKIP.contains(&e.name.as_str()) => {}
            dom::NodeKind::Element(_) | dom::NodeKind::Document => {
                stack.extend(tree.children(id).iter().rev().copied());
            }
            _ => {}
        }
    }
    dedup::collapse_whitespace(&pieces.join(" ")).trim().to_string()
}
