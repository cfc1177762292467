//! Prompt templates. Bodies ship in `templates/*.j2` (Jinja syntax) and may
//! be overridden per deployment from a directory holding files of the same
//! names.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use minijinja::{Environment, UndefinedBehavior};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Classifier,
    DirectExtract,
    Judge,
    ScriptGen,
    Qa,
    QaEval,
}

impl TemplateName {
    pub const ALL: [TemplateName; 6] = [
        TemplateName::Classifier,
        TemplateName::DirectExtract,
        TemplateName::Judge,
        TemplateName::ScriptGen,
        TemplateName::Qa,
        TemplateName::QaEval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Classifier => "classifier",
            TemplateName::DirectExtract => "direct_extract",
            TemplateName::Judge => "judge",
            TemplateName::ScriptGen => "script_gen",
            TemplateName::Qa => "qa",
            TemplateName::QaEval => "qa_eval",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.j2", self.as_str())
    }

    pub fn required_vars(self) -> &'static [&'static str] {
        match self {
            TemplateName::Classifier => &["html", "HTML_example_1", "HTML_example_2", "HTML_example_3"],
            TemplateName::DirectExtract => &["html", "html_title"],
            TemplateName::Judge => &["tx", "ty"],
            TemplateName::ScriptGen => &["html"],
            TemplateName::Qa => &["question", "reference"],
            TemplateName::QaEval => &["question", "gold", "answer"],
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            TemplateName::Classifier => include_str!("../../templates/classifier.j2"),
            TemplateName::DirectExtract => include_str!("../../templates/direct_extract.j2"),
            TemplateName::Judge => include_str!("../../templates/judge.j2"),
            TemplateName::ScriptGen => include_str!("../../templates/script_gen.j2"),
            TemplateName::Qa => include_str!("../../templates/qa.j2"),
            TemplateName::QaEval => include_str!("../../templates/qa_eval.j2"),
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateName {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| GatewayError::UnknownTemplate(s.to_string()))
    }
}

/// Few-shot pages filled into the classifier template's three example slots.
pub fn classifier_example_vars() -> [(&'static str, &'static str); 3] {
    [
        ("HTML_example_1", include_str!("../../templates/classifier_examples/1.html").trim_end()),
        ("HTML_example_2", include_str!("../../templates/classifier_examples/2.html").trim_end()),
        ("HTML_example_3", include_str!("../../templates/classifier_examples/3.html").trim_end()),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: String,
}

impl PromptTemplate {
    pub fn required_vars(&self) -> BTreeSet<&'static str> {
        self.name.required_vars().iter().copied().collect()
    }
}

/// The six prompt templates, built-in or overridden.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateName, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            templates: TemplateName::ALL
                .into_iter()
                .map(|n| {
                    (
                        n,
                        PromptTemplate {
                            name: n,
                            body: n.builtin_body().to_string(),
                        },
                    )
                })
                .collect(),
        }
    }
}

impl TemplateSet {
    /// Built-ins, with any `<name>.j2` found in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, GatewayError> {
        let mut set = Self::default();
        for n in TemplateName::ALL {
            let path = dir.join(n.file_name());
            if path.is_file() {
                let body = std::fs::read_to_string(&path)
                    .map_err(|e| GatewayError::Template(format!("{}: {e}", path.display())))?;
                set.templates.insert(n, PromptTemplate { name: n, body });
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: TemplateName) -> &PromptTemplate {
        &self.templates[&name]
    }

    /// Renders `name`. Optional sections appear iff their variables are
    /// present; `null` values count as absent.
    pub fn render(&self, name: TemplateName, vars: &Map<String, Value>) -> Result<String, GatewayError> {
        for required in name.required_vars() {
            if vars.get(*required).is_none_or(Value::is_null) {
                return Err(GatewayError::MissingVariable(required.to_string()));
            }
        }
        let present: Map<String, Value> = vars
            .iter()
            .filter(|(_, v)| !v.is_null())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();

        let mut env = Environment::new();
        env.set_undefined_behavior(UndefinedBehavior::Strict);
        env.set_trim_blocks(true);
        env.set_lstrip_blocks(true);
        env.set_keep_trailing_newline(true);
        let tmpl = env
            .template_from_str(&self.get(name).body)
            .map_err(|e| GatewayError::Template(e.to_string()))?;
        tmpl.render(&present)
            .map_err(|e| GatewayError::Template(e.to_string()))
    }
}

/// Renders with the built-in templates.
pub fn render(name: TemplateName, vars: &Map<String, Value>) -> Result<String, GatewayError> {
    TemplateSet::default().render(name, vars)
}

/// Builds a variable map from string pairs.
pub fn vars<'a>(pairs: impl IntoIterator<Item = (&'a str, Value)>) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
