use std::fmt;

use serde::{Deserialize, Serialize};

/// Separator between fields in the canonical joined form of a triple.
pub const FIELD_SEPARATOR: &str = " | ";

/// A `(subject, predicate, object)` fact. On the wire it is a 3-element
/// JSON array of strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[String; 3]", into = "[String; 3]")]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        Triple {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }

    /// Fields joined with `" | "`; the string fuzzy similarity compares.
    pub fn joined(&self) -> String {
        [
            self.subject.as_str(),
            self.predicate.as_str(),
            self.object.as_str(),
        ]
        .join(FIELD_SEPARATOR)
    }

    /// `("s", "p", "o")` with JSON string quoting, as shown to a judge.
    pub fn as_tuple_literal(&self) -> String {
        let q = |s: &str| serde_json::to_string(s).expect("string serializes");
        format!(
            "({}, {}, {})",
            q(&self.subject),
            q(&self.predicate),
            q(&self.object)
        )
    }
}

impl From<[String; 3]> for Triple {
    fn from([subject, predicate, object]: [String; 3]) -> Self {
        Triple {
            subject,
            predicate,
            object,
        }
    }
}

impl From<Triple> for [String; 3] {
    fn from(t: Triple) -> Self {
        [t.subject, t.predicate, t.object]
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}
