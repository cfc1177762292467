//! Question answering over a page's flattened text, optionally augmented
//! with extracted or gold triples, judged by a second model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::gateway::{parse_binary, vars, ChatModel, TemplateName, TemplateSet};
use crate::html::{flatten_html, RawHtmlDocument};
use crate::triple::Triple;

/// Header line that opens the triples section of a reference.
pub const TRIPLES_HEADER: &str = "### Triples";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QaError {
    #[error("reference mode {0:?} needs triples")]
    MissingTriples(ReferenceMode),
    #[error("no page for {0}")]
    UnknownPage(String),
    #[error("{0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    FlattenOnly,
    FlattenPlusPredicted,
    FlattenPlusGold,
}

impl ReferenceMode {
    pub fn needs_triples(self) -> bool {
        self != ReferenceMode::FlattenOnly
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub question: String,
    pub gold_answer: String,
    pub page_url: String,
    #[serde(default = "default_mode")]
    pub reference_mode: ReferenceMode,
}

fn default_mode() -> ReferenceMode {
    ReferenceMode::FlattenOnly
}

/// Flattened page text, followed in augmented modes by a triples section
/// with one `subject | predicate | object` line per triple.
pub fn build_reference(
    item: &QaItem,
    page: &RawHtmlDocument,
    triples: Option<&[Triple]>,
) -> Result<String, QaError> {
    let mut out = flatten_html(page);
    if item.reference_mode.needs_triples() {
        let triples = triples.ok_or(QaError::MissingTriples(item.reference_mode))?;
        out.push_str("\n\n");
        out.push_str(TRIPLES_HEADER);
        for t in triples {
            out.push('\n');
            out.push_str(&t.joined());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaVerdict {
    Correct,
    Incorrect,
    Unjudged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaResult {
    pub question: String,
    pub answer: String,
    pub verdict: QaVerdict,
    pub judged_by: String,
    /// Why the item is unjudged, if it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub reference_mode: ReferenceMode,
    /// Correct over judged items; `None` when nothing was judged.
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub judged: usize,
    pub unjudged: usize,
    pub results: Vec<QaResult>,
}

/// An item with its assembled reference text.
#[derive(Debug, Clone)]
pub struct PreparedItem {
    pub item: QaItem,
    pub reference: String,
}

fn answer_and_judge(
    p: &PreparedItem,
    backbone: &dyn ChatModel,
    judge: &dyn ChatModel,
    judge_name: &str,
    templates: &TemplateSet,
) -> QaResult {
    let unjudged = |answer: String, err: String| QaResult {
        question: p.item.question.clone(),
        answer,
        verdict: QaVerdict::Unjudged,
        judged_by: judge_name.to_string(),
        error: Some(err),
    };
    let answer = match templates
        .render(
            TemplateName::Qa,
            &vars([("question", json!(p.item.question)), ("reference", json!(p.reference))]),
        )
        .and_then(|prompt| backbone.complete(&prompt))
    {
        Ok(ex) => ex.response_text.trim().to_string(),
        Err(e) => return unjudged(String::new(), e.to_string()),
    };
    let verdict = templates
        .render(
            TemplateName::QaEval,
            &vars([
                ("question", json!(p.item.question)),
                ("gold", json!(p.item.gold_answer)),
                ("answer", json!(answer)),
            ]),
        )
        .and_then(|prompt| judge.complete(&prompt))
        .and_then(|ex| parse_binary(&ex.response_text, "correct", "incorrect"));
    match verdict {
        Ok(ok) => QaResult {
            question: p.item.question.clone(),
            answer,
            verdict: if ok { QaVerdict::Correct } else { QaVerdict::Incorrect },
            judged_by: judge_name.to_string(),
            error: None,
        },
        Err(e) => unjudged(answer, e.to_string()),
    }
}

/// Answers each item with `backbone` and judges it with `judge`. Items whose
/// answer or verdict cannot be obtained are unjudged and left out of the
/// accuracy denominator. Results keep input order.
pub fn run_qa(
    items: &[PreparedItem],
    mode: ReferenceMode,
    backbone: &dyn ChatModel,
    judge: &dyn ChatModel,
    judge_name: &str,
    templates: &TemplateSet,
    concurrency: usize,
) -> Result<QaReport, QaError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .map_err(|e| QaError::Pool(e.to_string()))?;
    let results: Vec<QaResult> = pool.install(|| {
        items
            .par_iter()
            .map(|p| answer_and_judge(p, backbone, judge, judge_name, templates))
            .collect()
    });
    let correct = results.iter().filter(|r| r.verdict == QaVerdict::Correct).count();
    let unjudged = results.iter().filter(|r| r.verdict == QaVerdict::Unjudged).count();
    let judged = results.len() - unjudged;
    Ok(QaReport {
        reference_mode: mode,
        accuracy: (judged > 0).then(|| correct as f64 / judged as f64),
        correct,
        judged,
        unjudged,
        results,
    })
}
