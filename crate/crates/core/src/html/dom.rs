//! Arena-backed element tree used by the dedup and flatten passes.

use std::fmt::Write as _;

pub type NodeId = usize;

/// Elements that never have children or an end tag.
pub const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

/// Elements whose content is kept as a single unparsed text node.
pub const RAW_TEXT_ELEMENTS: &[&str] = &[
    "script", "style", "textarea", "title", "xmp", "iframe", "noembed", "noframes",
];

pub fn is_void(name: &str) -> bool {
    VOID_ELEMENTS.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    /// Raw value as written in the source; `None` for bare boolean attributes.
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<Attribute>,
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|a| a.name == name)
            .and_then(|a| a.value.as_deref())
    }

    /// Class tokens split on ASCII whitespace, in source order.
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.attr("class")
            .unwrap_or("")
            .split_ascii_whitespace()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Document,
    Doctype(String),
    Element(Element),
    Text(String),
    Comment(String),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

/// A parsed document. Node 0 is always the document root. Detached nodes stay
/// in the arena but are unreachable from the root.
#[derive(Debug, Clone)]
pub struct DomTree {
    nodes: Vec<Node>,
}

impl Default for DomTree {
    fn default() -> Self {
        Self::new()
    }
}

impl DomTree {
    pub const ROOT: NodeId = 0;

    pub fn new() -> Self {
        DomTree {
            nodes: vec![Node {
                kind: NodeKind::Document,
                parent: None,
                children: Vec::new(),
            }],
        }
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn kind_mut(&mut self, id: NodeId) -> &mut NodeKind {
        &mut self.nodes[id].kind
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn element(&self, id: NodeId) -> Option<&Element> {
        match &self.nodes[id].kind {
            NodeKind::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn element_mut(&mut self, id: NodeId) -> Option<&mut Element> {
        match &mut self.nodes[id].kind {
            NodeKind::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn tag_name(&self, id: NodeId) -> Option<&str> {
        self.element(id).map(|e| e.name.as_str())
    }

    pub fn create(&mut self, kind: NodeKind) -> NodeId {
        self.nodes.push(Node {
            kind,
            parent: None,
            children: Vec::new(),
        });
        self.nodes.len() - 1
    }

    pub fn append(&mut self, parent: NodeId, child: NodeId) {
        self.nodes[child].parent = Some(parent);
        self.nodes[parent].children.push(child);
    }

    /// Appends text, merging into a trailing text sibling when there is one.
    pub fn append_text(&mut self, parent: NodeId, text: &str) {
        if let Some(&last) = self.nodes[parent].children.last() {
            if let NodeKind::Text(existing) = &mut self.nodes[last].kind {
                existing.push_str(text);
                return;
            }
        }
        let id = self.create(NodeKind::Text(text.to_string()));
        self.append(parent, id);
    }

    pub fn insert_after(&mut self, sibling: NodeId, node: NodeId) {
        let parent = self.nodes[sibling]
            .parent
            .expect("insert_after on a detached node");
        let pos = self.nodes[parent]
            .children
            .iter()
            .position(|&c| c == sibling)
            .expect("child missing from parent");
        self.nodes[node].parent = Some(parent);
        self.nodes[parent].children.insert(pos + 1, node);
    }

    pub fn detach(&mut self, id: NodeId) {
        if let Some(parent) = self.nodes[id].parent.take() {
            self.nodes[parent].children.retain(|&c| c != id);
        }
    }

    /// Pre-order walk of every node reachable from the root.
    pub fn descendants(&self, from: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![from];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id].children.iter().rev().copied());
        }
        out
    }

    pub fn find_first(&self, tag: &str) -> Option<NodeId> {
        self.descendants(Self::ROOT)
            .into_iter()
            .find(|&id| self.tag_name(id) == Some(tag))
    }

    /// Concatenated raw text under `id`.
    pub fn text_content(&self, id: NodeId) -> String {
        let mut out = String::new();
        for n in self.descendants(id) {
            if let NodeKind::Text(t) = &self.nodes[n].kind {
                out.push_str(t);
            }
        }
        out
    }

    /// Merges runs of adjacent text siblings into one node, everywhere.
    pub fn merge_adjacent_text(&mut self) {
        for id in self.descendants(Self::ROOT) {
            let children = std::mem::take(&mut self.nodes[id].children);
            let mut merged: Vec<NodeId> = Vec::with_capacity(children.len());
            for c in children {
                if let (Some(&prev), NodeKind::Text(t)) = (merged.last(), &self.nodes[c].kind) {
                    if let NodeKind::Text(_) = self.nodes[prev].kind {
                        let t = t.clone();
                        if let NodeKind::Text(p) = &mut self.nodes[prev].kind {
                            p.push_str(&t);
                        }
                        self.nodes[c].parent = None;
                        continue;
                    }
                }
                merged.push(c);
            }
            self.nodes[id].children = merged;
        }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for &c in &self.nodes[Self::ROOT].children {
            self.serialize_into(c, &mut out);
        }
        out
    }

    fn serialize_into(&self, id: NodeId, out: &mut String) {
        match &self.nodes[id].kind {
            NodeKind::Document => {
                for &c in &self.nodes[id].children {
                    self.serialize_into(c, out);
                }
            }
            NodeKind::Doctype(d) => {
                let _ = write!(out, "<!{d}>");
            }
            NodeKind::Text(t) => out.push_str(t),
            NodeKind::Comment(c) => {
                let _ = write!(out, "<!--{c}-->");
            }
            NodeKind::Element(e) => {
                out.push('<');
                out.push_str(&e.name);
                for a in &e.attrs {
                    out.push(' ');
                    out.push_str(&a.name);
                    if let Some(v) = &a.value {
                        write_attr_value(v, out);
                    }
                }
                out.push('>');
                if is_void(&e.name) {
                    return;
                }
                for &c in &self.nodes[id].children {
                    self.serialize_into(c, out);
                }
                let _ = write!(out, "</{}>", e.name);
            }
        }
    }
}

fn write_attr_value(v: &str, out: &mut String) {
    if !v.contains('"') {
        let _ = write!(out, "=\"{v}\"");
    } else if !v.contains('\'') {
        let _ = write!(out, "='{v}'");
    } else {
        let _ = write!(out, "=\"{}\"", v.replace('"', "&quot;"));
    }
}
