//! Builds training groups from crawl records: blacklist and language
//! filtering, URL-prefix grouping, LLM classification with a share gate,
//! seeded sampling, synthetic gold via direct extraction, and the subset of
//! examples whose scripts produced nothing.

mod filters;
mod grouping;
mod stages;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::html::RawHtmlDocument;
use crate::triple::Triple;

pub use filters::{AcceptAll, Blacklist, HeuristicEnglish, LanguageFilter};
pub use grouping::{filter_and_group, group_key, group_key_with, mark_blacklisted, FilterStats, GroupingMode};
pub use stages::{
    classify_groups, failure_case_subset, group_seed, sample_examples, synthesize_gold, ClassifyStats,
    SynthesisStats, DEFAULT_CONCURRENCY,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("malformed URL: {0}")]
    MalformedUrl(String),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("classifier unavailable: {0}")]
    ClassifierUnavailable(String),
    #[error("extractor unavailable: {0}")]
    ExtractorUnavailable(String),
    #[error("no run recorded for example anchored at {0}")]
    MissingRun(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRecord {
    pub url: String,
    pub html: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default)]
    pub detected_language: Option<String>,
    #[serde(default)]
    pub blacklist_flag: bool,
}

impl PageRecord {
    pub fn new(url: impl Into<String>, html: impl Into<String>) -> Self {
        PageRecord {
            url: url.into(),
            html: html.into(),
            title: None,
            detected_language: None,
            blacklist_flag: false,
        }
    }

    pub fn document(&self) -> RawHtmlDocument {
        RawHtmlDocument {
            url: self.url.clone(),
            html: self.html.clone(),
            title: self.title.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageGroup {
    pub key: String,
    pub pages: Vec<PageRecord>,
    /// Classifier outcome per remaining page URL; empty before classification.
    #[serde(default)]
    pub classified_semi_structured: BTreeMap<String, bool>,
}

impl PageGroup {
    pub fn documents(&self) -> Vec<RawHtmlDocument> {
        self.pages.iter().map(PageRecord::document).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineThresholds {
    /// Minimum pages per group.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Minimum percentage of pages classified semi-structured.
    #[serde(default = "default_m")]
    pub m: u32,
    /// Maximum pages per training example, anchor included.
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_n() -> usize {
    30
}
fn default_m() -> u32 {
    90
}
fn default_k() -> usize {
    13
}

impl Default for PipelineThresholds {
    fn default() -> Self {
        PipelineThresholds {
            n: default_n(),
            m: default_m(),
            k: default_k(),
        }
    }
}

impl PipelineThresholds {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.n < 1 {
            return Err(PipelineError::InvalidThresholds("n must be at least 1".into()));
        }
        if self.m > 100 {
            return Err(PipelineError::InvalidThresholds("m must be a percentage".into()));
        }
        if self.k < 1 || self.k > self.n {
            return Err(PipelineError::InvalidThresholds("k must lie in 1..=n".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleSource {
    Annotated,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub group_key: String,
    pub anchor: PageRecord,
    /// Pages the script is rewarded on, anchor first.
    pub reward_pages: Vec<PageRecord>,
    #[serde(default)]
    pub synthetic_gold: BTreeMap<String, Vec<Triple>>,
    pub source: ExampleSource,
}
