//! Structure-preserving keep-z deduplication.

use std::collections::BTreeSet;

use std::sync::LazyLock;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::dom::{DomTree, NodeId, NodeKind};
use super::{parse_html, RawHtmlDocument};

const DEFAULT_REMOVE_TAGS: &[&str] = &[
    "script", "style", "noscript", "iframe", "embed", "object", "applet", "meta", "link", "base",
];

const DEFAULT_KEEP_ATTRS: &[&str] = &[
    "id", "class", "role", "name", "type", "href", "src", "alt", "title", "rel", "target", "for",
    "action", "method", "value", "placeholder", "required",
];

const DEFAULT_CONTAINER_TAGS: &[&str] = &["ul", "ol", "div", "section", "tbody", "thead", "select"];

/// Attribute-name prefixes that always survive the whitelist.
pub const KEPT_ATTR_PREFIXES: [&str; 2] = ["data-", "aria-"];

/// Text inside these elements is left untouched by whitespace normalization.
const PRESERVE_WS: &[&str] = &["pre", "textarea", "script", "style"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DedupConfig {
    pub z: usize,
    pub remove_tags: BTreeSet<String>,
    pub keep_attrs: BTreeSet<String>,
    pub container_tags: BTreeSet<String>,
    pub normalize_whitespace: bool,
}

fn set_of(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            z: 3,
            remove_tags: set_of(DEFAULT_REMOVE_TAGS),
            keep_attrs: set_of(DEFAULT_KEEP_ATTRS),
            container_tags: set_of(DEFAULT_CONTAINER_TAGS),
            normalize_whitespace: true,
        }
    }
}

impl DedupConfig {
    pub fn with_z(z: usize) -> Self {
        DedupConfig {
            z,
            ..Self::default()
        }
    }

    pub fn keeps_attr(&self, name: &str) -> bool {
        self.keep_attrs.contains(name) || KEPT_ATTR_PREFIXES.iter().any(|p| name.starts_with(p))
    }
}

/// Grouping key for sibling elements: tag plus sorted, deduplicated classes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiblingSignature {
    pub tag: String,
    pub classes: Vec<String>,
}

impl SiblingSignature {
    pub fn of(tree: &DomTree, id: NodeId) -> Option<Self> {
        let el = tree.element(id)?;
        let classes: BTreeSet<String> = el.classes().map(str::to_string).collect();
        Some(SiblingSignature {
            tag: el.name.clone(),
            classes: classes.into_iter().collect(),
        })
    }

    /// Comment body announcing `hidden` dropped siblings.
    pub fn marker(&self, hidden: usize) -> String {
        if self.classes.is_empty() {
            format!(" ... {hidden} more <{}> elements ... ", self.tag)
        } else {
            format!(
                " ... {hidden} more <{} class='{}'> elements ... ",
                self.tag,
                self.classes.join(" ")
            )
        }
    }
}

static MARKER_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^ \.\.\. (\d+) more <([^\s>]+)(?: class='([^']*)')?> elements \.\.\. $").unwrap()
});

/// Parses a marker comment body back into `(hidden count, signature)`.
pub fn parse_marker(comment: &str) -> Option<(usize, SiblingSignature)> {
    let caps = MARKER_RE.captures(comment)?;
    let hidden = caps[1].parse().ok()?;
    let classes = caps
        .get(3)
        .map(|m| m.as_str().split(' ').map(str::to_string).collect())
        .unwrap_or_default();
    Some((
        hidden,
        SiblingSignature {
            tag: caps[2].to_string(),
            classes,
        },
    ))
}

fn is_kept_comment(body: &str) -> bool {
    body.trim_start().starts_with("...")
}

static BLANK_LINES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n[ \t]*(?:\n[ \t]*)+\n").unwrap());

pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_ws = false;
    for c in s.chars() {
        if c.is_whitespace() {
            if !in_ws {
                out.push(' ');
            }
            in_ws = true;
        } else {
            out.push(c);
            in_ws = false;
        }
    }
    out
}

/// Runs the keep-z pass on an already parsed tree.
pub fn dedup_tree(tree: &mut DomTree, config: &DedupConfig) {
    let all = tree.descendants(DomTree::ROOT);

    for &id in &all {
        let drop = match &tree.node(id).kind {
            NodeKind::Element(e) => config.remove_tags.contains(&e.name),
            NodeKind::Comment(c) => !is_kept_comment(c),
            _ => false,
        };
        if drop {
            tree.detach(id);
        }
    }

    for id in tree.descendants(DomTree::ROOT) {
        if let Some(el) = tree.element_mut(id) {
            el.attrs.retain(|a| config.keeps_attr(&a.name));
        }
    }

    // Pre-order: a container is collapsed before its surviving children are visited.
    let mut stack = vec![DomTree::ROOT];
    while let Some(id) = stack.pop() {
        let is_container = tree
            .tag_name(id)
            .is_some_and(|t| config.container_tags.contains(t));
        if is_container {
            collapse_siblings(tree, id, config.z);
        }
        stack.extend(tree.children(id).iter().rev().copied());
    }

    tree.merge_adjacent_text();
    if config.normalize_whitespace {
        normalize_text(tree, DomTree::ROOT, false);
    }
}

fn collapse_siblings(tree: &mut DomTree, parent: NodeId, z: usize) {
    // Groups in order of first occurrence.
    let mut groups: Vec<(SiblingSignature, Vec<NodeId>)> = Vec::new();
    for &c in tree.children(parent) {
        if let Some(sig) = SiblingSignature::of(tree, c) {
            match groups.iter_mut().find(|(s, _)| *s == sig) {
                Some((_, members)) => members.push(c),
                None => groups.push((sig, vec![c])),
            }
        }
    }
    for (sig, members) in groups {
        if members.len() <= z {
            continue;
        }
        let marker = tree.create(NodeKind::Comment(sig.marker(members.len() - z)));
        tree.insert_after(members[z.max(1) - 1], marker);
        for &extra in &members[z..] {
            tree.detach(extra);
        }
    }
}

fn normalize_text(tree: &mut DomTree, id: NodeId, preserve: bool) {
    let preserve = preserve || tree.tag_name(id).is_some_and(|t| PRESERVE_WS.contains(&t));
    let children: Vec<NodeId> = tree.children(id).to_vec();
    for c in children {
        if let NodeKind::Text(t) = tree.kind_mut(c) {
            if !preserve {
                *t = collapse_whitespace(t);
            }
        } else {
            normalize_text(tree, c, preserve);
        }
    }
}

/// Keep-z deduplication of a raw page. Unparseable input is returned as is.
pub fn dedup_html(raw: &RawHtmlDocument, config: &DedupConfig) -> String {
    let mut tree = match parse_html(raw) {
        Ok(t) => t,
        Err(_) => return raw.html.clone(),
    };
    dedup_tree(&mut tree, config);
    let out = tree.serialize();
    if config.normalize_whitespace {
        BLANK_LINES.replace_all(&out, "\n\n").into_owned()
    } else {
        out
    }
}
