use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{execute_script, ExecutionLimits, ExecutionResult, ExecutionStatus, ExtractionScript, RuntimeError};
use crate::gateway::{vars, ChatModel, TemplateName, TemplateSet};
use crate::html::{dedup_html, DedupConfig, RawHtmlDocument};
use crate::triple::Triple;

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```[^\n`]*\n(.*?)```").unwrap());

/// The longest fenced code block, or the whole response when there is none.
/// `None` when that leaves nothing but whitespace.
pub fn extract_code(response: &str) -> Option<String> {
    let mut best: Option<&str> = None;
    for cap in FENCE.captures_iter(response) {
        let body = cap.get(1).expect("group").as_str();
        if best.is_none_or(|b| body.len() > b.len()) {
            best = Some(body);
        }
    }
    let code = best.unwrap_or(response);
    (!code.trim().is_empty()).then(|| code.trim_end().to_string() + "\n")
}

/// `[("s", "p", "o"), ...]`, the form shown to the generator.
pub fn triples_literal(triples: &[Triple]) -> String {
    let items: Vec<String> = triples.iter().map(Triple::as_tuple_literal).collect();
    format!("[{}]", items.join(", "))
}

/// A worked example for few-shot prompting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub html: String,
    pub triples: Vec<Triple>,
}

/// Triples shown to the generator as a target hint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriplesHint {
    /// A sample of the expected triples.
    Sample(Vec<Triple>),
    /// The full expected list.
    All(Vec<Triple>),
}

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub interpreter: String,
    pub limits: ExecutionLimits,
    /// When set, pages are shown to the generator in deduplicated form.
    pub dedup: Option<DedupConfig>,
    pub templates: TemplateSet,
    pub hint: Option<TriplesHint>,
}

impl GenerateConfig {
    pub fn new(interpreter: impl Into<String>) -> Self {
        GenerateConfig {
            interpreter: interpreter.into(),
            limits: ExecutionLimits::default(),
            dedup: Some(DedupConfig::default()),
            templates: TemplateSet::default(),
            hint: None,
        }
    }

    fn prompt_html(&self, url: &str, html: &str) -> String {
        match &self.dedup {
            Some(cfg) => dedup_html(&RawHtmlDocument::new(url, html), cfg),
            None => html.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub script: ExtractionScript,
    pub result: ExecutionResult,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryTranscript {
    pub attempts: Vec<Attempt>,
    #[serde(rename = "final")]
    pub final_script: ExtractionScript,
    pub iterations_used: usize,
}

impl RetryTranscript {
    pub fn final_result(&self) -> &ExecutionResult {
        &self.attempts.last().expect("at least one attempt").result
    }
}

/// Execution feedback passed back to the generator.
pub fn render_feedback(result: &ExecutionResult) -> String {
    let mut out = format!("status: {}", result.status.as_str());
    if let Some(code) = result.exit_code {
        out.push_str(&format!("\nexit code: {code}"));
    }
    out.push_str(&format!("\ntriples extracted: {}", result.triples.len()));
    if !result.triples.is_empty() {
        let sample: Vec<Triple> = result.triples.iter().take(10).cloned().collect();
        out.push_str(&format!("\nfirst triples: {}", triples_literal(&sample)));
    }
    let stderr = result.stderr_tail.trim();
    if !stderr.is_empty() {
        out.push_str("\nstderr:\n");
        out.push_str(stderr);
    }
    out
}

/// Asks `generator` for a script, runs it on `page`, and on any non-ok
/// status asks again with the previous script and its feedback, for at most
/// `n` attempts in total. The last script is returned whatever its status.
pub fn agentic_generate(
    generator: &dyn ChatModel,
    page: &RawHtmlDocument,
    n: usize,
    shots: &[Shot],
    config: &GenerateConfig,
) -> Result<RetryTranscript, RuntimeError> {
    let n = n.max(1);
    let mut base = vars([("html", json!(config.prompt_html(&page.url, &page.html)))]);
    if !shots.is_empty() {
        let examples: Vec<Value> = shots
            .iter()
            .map(|s| {
                json!({
                    "html_content": config.prompt_html(&page.url, &s.html),
                    "triples_annotation": triples_literal(&s.triples),
                })
            })
            .collect();
        base.insert("example_global_html_triples".into(), Value::Array(examples));
    }
    match &config.hint {
        Some(TriplesHint::Sample(t)) => {
            base.insert("example_triples".into(), json!(triples_literal(t)));
        }
        Some(TriplesHint::All(t)) => {
            base.insert("all_triples".into(), json!(triples_literal(t)));
        }
        None => {}
    }

    let mut attempts: Vec<Attempt> = Vec::new();
    for i in 1..=n {
        let mut vars = base.clone();
        if let Some(prev) = attempts.last() {
            vars.insert("prev_script".into(), json!(prev.script.source.trim_end()));
            vars.insert("feedback".into(), json!(prev.feedback));
        }
        let prompt = config
            .templates
            .render(TemplateName::ScriptGen, &vars)
            .map_err(|e| RuntimeError::GeneratorUnavailable(e.to_string()))?;
        let response = generator
            .complete(&prompt)
            .map_err(|e| RuntimeError::GeneratorUnavailable(e.to_string()))?
            .response_text;
        let id = format!("{}#{i}", page.url);
        let (script, result) = match extract_code(&response) {
            Some(code) => {
                let script = ExtractionScript::new(id, code, config.interpreter.clone(), page.url.clone())?;
                let result = execute_script(&script, page, &config.limits)?;
                (script, result)
            }
            None => (
                ExtractionScript {
                    id,
                    source: response.clone(),
                    interpreter: config.interpreter.clone(),
                    created_from: page.url.clone(),
                },
                ExecutionResult::failed(ExecutionStatus::Error, "no code found in response"),
            ),
        };
        let feedback = render_feedback(&result);
        let done = result.status.is_ok();
        attempts.push(Attempt {
            script,
            result,
            feedback,
        });
        if done {
            break;
        }
    }
    Ok(RetryTranscript {
        final_script: attempts.last().expect("n >= 1").script.clone(),
        iterations_used: attempts.len(),
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_fence_wins() {
        let r = "intro\n```python\nshort\n```\ntext\n```\ndef main(html):\n    return []\n```";
        assert_eq!(extract_code(r).unwrap(), "def main(html):\n    return []\n");
        assert_eq!(extract_code("def main(html): return []").unwrap(), "def main(html): return []\n");
        assert_eq!(extract_code("  \n"), None);
    }

    #[test]
    fn literal_form() {
        let t = vec![Triple::new("a", "b", "c"), Triple::new("x'", "y", "z\"")];
        assert_eq!(triples_literal(&t), r#"[("a", "b", "c"), ("x'", "y", "z\"")]"#);
        assert_eq!(triples_literal(&[]), "[]");
    }

    #[test]
    fn feedback_text() {
        let mut r = ExecutionResult::failed(ExecutionStatus::Empty, "warn\n");
        r.exit_code = Some(0);
        assert_eq!(
            render_feedback(&r),
            "status: empty\nexit code: 0\ntriples extracted: 0\nstderr:\nwarn"
        );
    }
}
