//! Lenient HTML tree builder.
//!
//! Covers the recovery rules that matter for real-world pages: implied end
//! tags for `p`, list items, table rows and cells, options; void elements;
//! raw-text content; stray end tags are ignored once a special element
//! boundary is reached. It does not create implicit `html`/`head`/`body`
//! wrappers and does not run the adoption agency algorithm.

use super::dom::{is_void, Attribute, DomTree, Element, NodeId, NodeKind, RAW_TEXT_ELEMENTS};

/// Elements that stop searches for an end-tag match or an implied close.
const SPECIAL: &[&str] = &[
    "address", "applet", "area", "article", "aside", "base", "blockquote", "body", "br", "button",
    "caption", "center", "col", "colgroup", "dd", "details", "dir", "div", "dl", "dt", "embed",
    "fieldset", "figcaption", "figure", "footer", "form", "frame", "frameset", "h1", "h2", "h3",
    "h4", "h5", "h6", "head", "header", "hgroup", "hr", "html", "iframe", "img", "input", "li",
    "link", "listing", "main", "marquee", "menu", "meta", "nav", "noembed", "noframes", "noscript",
    "object", "ol", "p", "param", "plaintext", "pre", "script", "section", "select", "source",
    "style", "summary", "table", "tbody", "td", "template", "textarea", "tfoot", "th", "thead",
    "title", "tr", "track", "ul", "wbr", "xmp",
];

/// Start tags that close an open `p` in button scope.
const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "center", "details", "dialog", "dir", "div",
    "dl", "dd", "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4",
    "h5", "h6", "header", "hgroup", "hr", "li", "listing", "main", "menu", "nav", "ol", "p",
    "plaintext", "pre", "section", "summary", "table", "ul", "xmp",
];

const BUTTON_SCOPE: &[&str] = &[
    "applet", "caption", "html", "table", "td", "th", "marquee", "object", "template", "button",
];

const HEADINGS: &[&str] = &["h1", "h2", "h3", "h4", "h5", "h6"];

struct Builder {
    tree: DomTree,
    stack: Vec<NodeId>,
}

impl Builder {
    fn current(&self) -> NodeId {
        *self.stack.last().unwrap_or(&DomTree::ROOT)
    }

    fn open_name(&self, idx: usize) -> &str {
        self.tree.tag_name(self.stack[idx]).unwrap_or("")
    }

    /// Index of the nearest open `name`, searching downward until a boundary.
    fn find_open(&self, name: &str, boundary: impl Fn(&str) -> bool) -> Option<usize> {
        for i in (0..self.stack.len()).rev() {
            let open = self.open_name(i);
            if open == name {
                return Some(i);
            }
            if boundary(open) {
                return None;
            }
        }
        None
    }

    fn pop_to(&mut self, idx: usize) {
        self.stack.truncate(idx);
    }

    fn close_p_in_button_scope(&mut self) {
        if let Some(i) = self.find_open("p", |n| BUTTON_SCOPE.contains(&n)) {
            self.pop_to(i);
        }
    }

    fn close_list_item(&mut self, items: &[&str]) {
        for i in (0..self.stack.len()).rev() {
            let open = self.open_name(i);
            if items.contains(&open) {
                self.pop_to(i);
                return;
            }
            if SPECIAL.contains(&open) && !matches!(open, "address" | "div" | "p") {
                return;
            }
        }
    }

    fn close_within_table(&mut self, targets: &[&str], boundaries: &[&str]) {
        for i in (0..self.stack.len()).rev() {
            let open = self.open_name(i);
            if targets.contains(&open) {
                self.pop_to(i);
                return;
            }
            if boundaries.contains(&open) || open == "html" {
                return;
            }
        }
    }

    fn apply_implied_closes(&mut self, name: &str) {
        if CLOSES_P.contains(&name) {
            self.close_p_in_button_scope();
        }
        match name {
            "li" => self.close_list_item(&["li"]),
            "dd" | "dt" => self.close_list_item(&["dd", "dt"]),
            "tr" => self.close_within_table(&["tr"], &["table", "tbody", "thead", "tfoot"]),
            "td" | "th" => self.close_within_table(&["td", "th"], &["tr", "table"]),
            "thead" | "tbody" | "tfoot" => {
                self.close_within_table(&["thead", "tbody", "tfoot"], &["table"])
            }
            "option" => {
                if self.tree.tag_name(self.current()) == Some("option") {
                    self.stack.pop();
                }
            }
            "optgroup" => {
                if self.tree.tag_name(self.current()) == Some("option") {
                    self.stack.pop();
                }
                if self.tree.tag_name(self.current()) == Some("optgroup") {
                    self.stack.pop();
                }
            }
            _ => {}
        }
        if HEADINGS.contains(&name) {
            if let Some(cur) = self.tree.tag_name(self.current()) {
                if HEADINGS.contains(&cur) {
                    self.stack.pop();
                }
            }
        }
    }

    fn start_tag(&mut self, name: String, attrs: Vec<Attribute>, self_closing: bool) -> bool {
        self.apply_implied_closes(&name);
        let void = is_void(&name);
        let id = self.tree.create(NodeKind::Element(Element {
            name,
            attrs,
        }));
        let parent = self.current();
        self.tree.append(parent, id);
        if !void && !self_closing {
            self.stack.push(id);
            true
        } else {
            false
        }
    }

    fn end_tag(&mut self, name: &str) {
        if name == "br" {
            self.start_tag("br".into(), Vec::new(), false);
            return;
        }
        if name == "p" && self.find_open("p", |n| BUTTON_SCOPE.contains(&n)).is_none() {
            // A stray </p> yields an empty paragraph.
            self.start_tag("p".into(), Vec::new(), true);
            return;
        }
        if let Some(i) = self.find_open(name, |n| SPECIAL.contains(&n)) {
            self.pop_to(i);
        }
    }
}

fn is_tag_name_start(b: u8) -> bool {
    b.is_ascii_alphabetic()
}

fn find_ci(hay: &str, from: usize, needle: &str) -> Option<usize> {
    let h = hay.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (from..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Parses `input` into a tree. Never fails; empty input yields an empty tree.
pub fn build_tree(input: &str) -> DomTree {
    let mut b = Builder {
        tree: DomTree::new(),
        stack: Vec::new(),
    };
    let bytes = input.as_bytes();
    let len = bytes.len();
    let mut i = 0;
    let mut text_start = 0;

    macro_rules! flush_text {
        ($end:expr) => {
            if $end > text_start {
                let parent = b.current();
                b.tree.append_text(parent, &input[text_start..$end]);
            }
        };
    }

    while i < len {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let rest = &input[i..];
        if rest.starts_with("<!--") {
            flush_text!(i);
            let body_start = i + 4;
            let (body_end, next) = match input[body_start..].find("-->") {
                Some(off) => (body_start + off, body_start + off + 3),
                None => (len, len),
            };
            let id = b
                .tree
                .create(NodeKind::Comment(input[body_start..body_end].to_string()));
            let parent = b.current();
            b.tree.append(parent, id);
            i = next;
            text_start = i;
        } else if rest.starts_with("<!") || rest.starts_with("<?") {
            flush_text!(i);
            let end = input[i..].find('>').map(|o| i + o).unwrap_or(len);
            let body = &input[i + 2..end];
            let kind = if rest.starts_with("<!") && body.len() >= 7 && body[..7].eq_ignore_ascii_case("doctype") {
                NodeKind::Doctype(body.to_string())
            } else {
                NodeKind::Comment(body.to_string())
            };
            let id = b.tree.create(kind);
            let parent = if matches!(b.tree.node(id).kind, NodeKind::Doctype(_)) {
                DomTree::ROOT
            } else {
                b.current()
            };
            b.tree.append(parent, id);
            i = (end + 1).min(len);
            text_start = i;
        } else if rest.starts_with("</") && i + 2 < len && is_tag_name_start(bytes[i + 2]) {
            flush_text!(i);
            let mut j = i + 2;
            while j < len && !bytes[j].is_ascii_whitespace() && bytes[j] != b'>' && bytes[j] != b'/' {
                j += 1;
            }
            let name = input[i + 2..j].to_ascii_lowercase();
            let end = input[j..].find('>').map(|o| j + o + 1).unwrap_or(len);
            b.end_tag(&name);
            i = end;
            text_start = i;
        } else if i + 1 < len && is_tag_name_start(bytes[i + 1]) {
            flush_text!(i);
            let (name, attrs, self_closing, next) = parse_start_tag(input, i + 1);
            let pushed = b.start_tag(name.clone(), attrs, self_closing);
            i = next;
            text_start = i;
            if pushed && RAW_TEXT_ELEMENTS.contains(&name.as_str()) {
                let close = format!("</{name}");
                let end = find_ci(input, i, &close).unwrap_or(len);
                if end > i {
                    let parent = b.current();
                    b.tree.append_text(parent, &input[i..end]);
                }
                b.stack.pop();
                i = if end < len {
                    input[end..].find('>').map(|o| end + o + 1).unwrap_or(len)
                } else {
                    len
                };
                text_start = i;
            }
        } else {
            i += 1;
        }
    }
    flush_text!(len);
    b.tree
}

/// Parses the tag starting at the name byte `start`; returns the lowercase
/// name, attributes, whether `/>` closed it, and the index after `>`.
fn parse_start_tag(input: &str, start: usize) -> (String, Vec<Attribute>, bool, usize) {
    let bytes = input.as_bytes();
    let len = bytes.len();
    let mut j = start;
    while j < len && !bytes[j].is_ascii_whitespace() && bytes[j] != b'>' && bytes[j] != b'/' {
        j += 1;
    }
    let name = input[start..j].to_ascii_lowercase();
    let mut attrs: Vec<Attribute> = Vec::new();
    let mut self_closing = false;
    loop {
        while j < len && (bytes[j].is_ascii_whitespace() || bytes[j] == b'/') {
            if bytes[j] == b'/' && j + 1 < len && bytes[j + 1] == b'>' {
                self_closing = true;
            }
            j += 1;
        }
        if j >= len {
            return (name, attrs, self_closing, len);
        }
        if bytes[j] == b'>' {
            return (name, attrs, self_closing, j + 1);
        }
        self_closing = false;
        let name_start = j;
        j += 1;
        while j < len
            && !bytes[j].is_ascii_whitespace()
            && !matches!(bytes[j], b'>' | b'/' | b'=')
        {
            j += 1;
        }
        let attr_name = input[name_start..j].to_ascii_lowercase();
        let mut k = j;
        while k < len && bytes[k].is_ascii_whitespace() {
            k += 1;
        }
        let mut value = None;
        if k < len && bytes[k] == b'=' {
            k += 1;
            while k < len && bytes[k].is_ascii_whitespace() {
                k += 1;
            }
            if k < len && (bytes[k] == b'"' || bytes[k] == b'\'') {
                let q = bytes[k];
                let vstart = k + 1;
                let vend = input[vstart..]
                    .bytes()
                    .position(|c| c == q)
                    .map(|o| vstart + o)
                    .unwrap_or(len);
                value = Some(input[vstart..vend].to_string());
                j = (vend + 1).min(len);
            } else {
                let vstart = k;
                while k < len && !bytes[k].is_ascii_whitespace() && bytes[k] != b'>' {
                    k += 1;
                }
                value = Some(input[vstart..k].to_string());
                j = k;
            }
        }
        if !attrs.iter().any(|a| a.name == attr_name) {
            attrs.push(Attribute {
                name: attr_name,
                value,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(s: &str) -> String {
        build_tree(s).serialize()
    }

    #[test]
    fn well_formed_is_preserved() {
        let s = "<html><body><p class=\"a\">x</p></body></html>";
        assert_eq!(roundtrip(s), s);
    }

    #[test]
    fn unclosed_p_closed_at_div_end() {
        assert_eq!(roundtrip("<div><p>unclosed"), "<div><p>unclosed</p></div>");
    }

    #[test]
    fn implied_list_and_table_closes() {
        assert_eq!(
            roundtrip("<ul><li>a<li>b</ul>"),
            "<ul><li>a</li><li>b</li></ul>"
        );
        assert_eq!(
            roundtrip("<table><tr><td>1<td>2<tr><td>3</table>"),
            "<table><tr><td>1</td><td>2</td></tr><tr><td>3</td></tr></table>"
        );
        assert_eq!(roundtrip("<p>a<div>b</div>"), "<p>a</p><div>b</div>");
    }

    #[test]
    fn raw_text_and_comments() {
        assert_eq!(
            roundtrip("<script>if (a<b) {}</script><!-- c --><p>x"),
            "<script>if (a<b) {}</script><!-- c --><p>x</p>"
        );
        assert_eq!(roundtrip("<!DOCTYPE html><br/>"), "<!DOCTYPE html><br>");
    }

    #[test]
    fn stray_end_tags() {
        assert_eq!(roundtrip("<div>a</span>b</div>"), "<div>ab</div>");
        assert_eq!(roundtrip("<td><div>x</td>"), "<td><div>x</div></td>");
        assert_eq!(roundtrip("a</p>b"), "a<p></p>b");
    }

    #[test]
    fn attribute_forms() {
        assert_eq!(
            roundtrip("<input type=text required value='a\"b' ID=x id=y>"),
            "<input type=\"text\" required value='a\"b' id=\"x\">"
        );
    }

    #[test]
    fn lone_angle_is_text() {
        assert_eq!(roundtrip("<p>1 < 2</p>"), "<p>1 < 2</p>");
    }
}
