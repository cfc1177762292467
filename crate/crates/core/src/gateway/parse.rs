//! Parsers for model responses. None of them evaluate anything: triple
//! literals go through a grammar that admits only string literals, commas
//! and brackets.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::GatewayError;
use crate::triple::Triple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Yes,
    No,
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub reason: String,
    pub decision: Decision,
}

fn normalize_decision(raw: &str) -> Option<Decision> {
    let d = raw.trim().trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase();
    match d.as_str() {
        "yes" => Some(Decision::Yes),
        "no" => Some(Decision::No),
        "exclude" => Some(Decision::Exclude),
        _ => None,
    }
}

/// Reads the first JSON object carrying a recognizable `decision`.
pub fn parse_classifier(response: &str) -> Result<ClassifierVerdict, GatewayError> {
    for (i, _) in response.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&response[i..]).into_iter::<Value>();
        let Some(Ok(Value::Object(obj))) = stream.next() else {
            continue;
        };
        let Some(decision) = obj.get("decision").and_then(Value::as_str).and_then(normalize_decision) else {
            continue;
        };
        let reason = obj
            .get("reason")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        return Ok(ClassifierVerdict { reason, decision });
    }
    Err(GatewayError::UnparseableVerdict(truncate(response)))
}

fn truncate(s: &str) -> String {
    s.chars().take(200).collect()
}

/// Case-insensitive prefix match after trimming whitespace and leading
/// quote/emphasis characters. When one word is a prefix of the other (as in
/// "correct"/"incorrect") the longer one is tested first.
pub fn parse_binary(response: &str, positive: &str, negative: &str) -> Result<bool, GatewayError> {
    let text = response
        .trim()
        .trim_start_matches(['"', '\'', '*', '`', '_'])
        .to_lowercase();
    let pos = positive.to_lowercase();
    let neg = negative.to_lowercase();
    let mut order = [(neg.as_str(), false), (pos.as_str(), true)];
    if pos.len() > neg.len() {
        order.swap(0, 1);
    }
    for (word, value) in order {
        if !word.is_empty() && text.starts_with(word) {
            return Ok(value);
        }
    }
    Err(GatewayError::UnparseableVerdict(truncate(response)))
}

/// Triples parsed from a response, plus how many inner lists were dropped
/// for having the wrong arity.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LiteralTriples {
    pub triples: Vec<Triple>,
    pub dropped: usize,
}

/// Finds the first list-of-lists literal of strings in `response`.
pub fn parse_triples_literal(response: &str) -> Result<LiteralTriples, GatewayError> {
    for (i, _) in response.match_indices('[') {
        let mut p = LiteralParser {
            chars: response[i..].char_indices().peekable(),
            src: &response[i..],
        };
        if let Some(rows) = p.list_of_lists() {
            let mut out = LiteralTriples::default();
            for row in rows {
                match <[String; 3]>::try_from(row) {
                    Ok(arr) => out.triples.push(Triple::from(arr)),
                    Err(row) => {
                        log::warn!("dropping inner list of length {} (expected 3)", row.len());
                        out.dropped += 1;
                    }
                }
            }
            return Ok(out);
        }
    }
    Err(GatewayError::NoLiteralFound)
}

struct LiteralParser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
}

impl LiteralParser<'_> {
    fn skip_ws(&mut self) {
        while self.chars.next_if(|(_, c)| c.is_whitespace()).is_some() {}
    }

    fn eat(&mut self, want: char) -> bool {
        self.chars.next_if(|&(_, c)| c == want).is_some()
    }

    fn list_of_lists(&mut self) -> Option<Vec<Vec<String>>> {
        if !self.eat('[') {
            return None;
        }
        let mut rows = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(']') {
                return Some(rows);
            }
            rows.push(self.string_list()?);
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            self.skip_ws();
            return self.eat(']').then_some(rows);
        }
    }

    fn string_list(&mut self) -> Option<Vec<String>> {
        let close = if self.eat('[') {
            ']'
        } else if self.eat('(') {
            ')'
        } else {
            return None;
        };
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(close) {
                return Some(items);
            }
            items.push(self.string()?);
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            self.skip_ws();
            return self.eat(close).then_some(items);
        }
    }

    fn string(&mut self) -> Option<String> {
        let (_, quote) = self.chars.next_if(|&(_, c)| c == '"' || c == '\'')?;
        let mut out = String::new();
        loop {
            let (_, c) = self.chars.next()?;
            match c {
                c if c == quote => return Some(out),
                '\n' => return None,
                '\\' => {
                    let (_, e) = self.chars.next()?;
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '0' => out.push('\0'),
                        '\\' | '\'' | '"' => out.push(e),
                        '\n' => {}
                        'x' => out.push(self.hex_escape(2)?),
                        'u' => out.push(self.hex_escape(4)?),
                        'U' => out.push(self.hex_escape(8)?),
                        other => {
                            out.push('\\');
                            out.push(other);
                        }
                    }
                }
                c => out.push(c),
            }
        }
    }

    fn hex_escape(&mut self, digits: usize) -> Option<char> {
        let (start, _) = *self.chars.peek()?;
        for _ in 0..digits {
            self.chars.next_if(|(_, c)| c.is_ascii_hexdigit())?;
        }
        let hex = &self.src[start..start + digits];
        char::from_u32(u32::from_str_radix(hex, 16).ok()?)
    }
}
