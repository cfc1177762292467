//! The lenient tree builder checked against html5ever's tokenizer on a
//! fixture corpus: same elements, attributes, comments and text in the same
//! order, and for well-formed pages the same nesting.

mod common;

use std::cell::RefCell;

use html5ever::tendril::StrTendril;
use html5ever::tokenizer::states::RawKind;
use html5ever::tokenizer::{
    BufferQueue, TagKind, Token, TokenSink, TokenSinkResult, Tokenizer, TokenizerOpts,
};
use scribe_forge::html::dom::{NodeKind, RAW_TEXT_ELEMENTS};
use scribe_forge::html::{decode_entities, parse_html, DomTree, RawHtmlDocument};

#[derive(Debug, Clone, PartialEq)]
enum Event {
    Start { name: String, attrs: Vec<(String, String)>, path: Vec<String> },
    Comment(String),
}

#[derive(Default)]
struct Collected {
    events: Vec<Event>,
    text: String,
    stack: Vec<String>,
}

struct Sink(RefCell<Collected>);

const VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source", "track", "wbr",
];

impl TokenSink for Sink {
    type Handle = ();

    fn process_token(&self, token: Token, _line: u64) -> TokenSinkResult<()> {
        let mut c = self.0.borrow_mut();
        match token {
            Token::TagToken(tag) => {
                let name = tag.name.to_string();
                match tag.kind {
                    TagKind::StartTag => {
                        let mut attrs: Vec<(String, String)> =
                            tag.attrs.iter().map(|a| (a.name.local.to_string(), a.value.to_string())).collect();
                        attrs.sort();
                        let path = c.stack.clone();
                        c.events.push(Event::Start { name: name.clone(), attrs, path });
                        if !VOID.contains(&name.as_str()) && !tag.self_closing {
                            c.stack.push(name.clone());
                        }
                        return match name.as_str() {
                            "script" => TokenSinkResult::RawData(RawKind::ScriptData),
                            "style" | "xmp" | "iframe" | "noembed" | "noframes" => {
                                TokenSinkResult::RawData(RawKind::Rawtext)
                            }
                            "title" | "textarea" => TokenSinkResult::RawData(RawKind::Rcdata),
                            _ => TokenSinkResult::Continue,
                        };
                    }
                    TagKind::EndTag => {
                        if let Some(i) = c.stack.iter().rposition(|n| *n == name) {
                            c.stack.truncate(i);
                        }
                    }
                }
            }
            Token::CommentToken(t) => c.events.push(Event::Comment(t.to_string())),
            Token::CharacterTokens(t) => c.text.push_str(&t),
            _ => {}
        }
        TokenSinkResult::Continue
    }
}

fn oracle(html: &str) -> Collected {
    let input = BufferQueue::default();
    input.push_back(StrTendril::from_slice(html));
    let tok = Tokenizer::new(Sink(RefCell::new(Collected::default())), TokenizerOpts::default());
    let _ = tok.feed(&input);
    tok.end();
    tok.sink.0.into_inner()
}

fn ours(tree: &DomTree) -> Collected {
    fn walk(tree: &DomTree, id: usize, path: &mut Vec<String>, raw: bool, out: &mut Collected) {
        match &tree.node(id).kind {
            NodeKind::Element(e) => {
                let mut attrs: Vec<(String, String)> = Vec::new();
                for a in &e.attrs {
                    if attrs.iter().all(|(n, _)| *n != a.name) {
                        attrs.push((a.name.clone(), decode_entities(a.value.as_deref().unwrap_or(""))));
                    }
                }
                attrs.sort();
                out.events.push(Event::Start { name: e.name.clone(), attrs, path: path.clone() });
                path.push(e.name.clone());
                let raw = matches!(e.name.as_str(), "script" | "style" | "xmp" | "iframe" | "noembed" | "noframes");
                for &c in tree.children(id) {
                    walk(tree, c, path, raw, out);
                }
                path.pop();
            }
            NodeKind::Text(t) => out.text.push_str(&if raw { t.clone() } else { decode_entities(t) }),
            NodeKind::Comment(t) => out.events.push(Event::Comment(t.clone())),
            _ => {
                for &c in tree.children(id) {
                    walk(tree, c, path, raw, out);
                }
            }
        }
    }
    let mut out = Collected::default();
    walk(tree, DomTree::ROOT, &mut Vec::new(), false, &mut out);
    out
}

fn strip_paths(events: &[Event]) -> Vec<Event> {
    events
        .iter()
        .map(|e| match e {
            Event::Start { name, attrs, .. } => Event::Start { name: name.clone(), attrs: attrs.clone(), path: vec![] },
            other => other.clone(),
        })
        .collect()
}

#[test]
fn fixture_corpus_matches_tokenizer() {
    let dir = common::fixtures().join("html");
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 20);
    assert!(RAW_TEXT_ELEMENTS.contains(&"script"));
    for path in files {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let html = std::fs::read_to_string(&path).unwrap();
        let tree = parse_html(&RawHtmlDocument::new(name.clone(), html.clone())).unwrap();
        let want = oracle(&html);
        let got = ours(&tree);
        assert_eq!(got.text, want.text, "{name}: text");
        if name.starts_with("wf_") {
            assert_eq!(got.events, want.events, "{name}: elements and nesting");
        } else {
            assert_eq!(strip_paths(&got.events), strip_paths(&want.events), "{name}: elements");
        }
    }
}

#[test]
fn serialization_round_trips_structure() {
    let dir = common::fixtures().join("html");
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let html = std::fs::read_to_string(&path).unwrap();
        let tree = parse_html(&RawHtmlDocument::new("u", html)).unwrap();
        let again = parse_html(&RawHtmlDocument::new("u", tree.serialize())).unwrap();
        assert_eq!(ours(&again).events, ours(&tree).events, "{}", path.display());
        assert_eq!(again.serialize(), tree.serialize(), "{}", path.display());
    }
}
