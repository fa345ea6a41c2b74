//! Accessibility-tree model, element indexing and the HTML-like text form the
//! agent reasons over.
//!
//! A screen is described by a tree of [`A11yNode`]s. [`assign_indices`] walks
//! the tree in pre-order and hands out consecutive element indices so that a
//! policy can name elements (or whole groups of elements) symbolically, and
//! [`to_dom_text`] renders the indexed tree as nested markup:
//!
//! ```
//! use vdagent::a11y::{assign_indices, parse_tree};
//!
//! let root = parse_tree(r#"{"id":"ok","role":"button","text":"OK","bounds":[0,0,100,50],"clickable":true}"#).unwrap();
//! let tree = assign_indices(&root);
//! assert_eq!(tree.dom_text(), "<button index=0>OK</button>");
//! ```

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest element text kept in the DOM text before it is cut with an ellipsis.
pub const MAX_DOM_TEXT_CHARS: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum A11yError {
    #[error("malformed tree at node {node:?}: {reason}")]
    MalformedTree { node: String, reason: String },
    #[error("unknown element index {0}")]
    UnknownIndex(u32),
}

impl A11yError {
    fn malformed(node: impl Into<String>, reason: impl Into<String>) -> Self {
        A11yError::MalformedTree {
            node: node.into(),
            reason: reason.into(),
        }
    }
}

/// Axis-aligned rectangle in device pixels. `right` and `bottom` are
/// exclusive, so `width() == right - left`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct Rect {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl From<[u32; 4]> for Rect {
    fn from([left, top, right, bottom]: [u32; 4]) -> Self {
        Rect {
            left,
            top,
            right,
            bottom,
        }
    }
}

impl From<Rect> for [u32; 4] {
    fn from(r: Rect) -> Self {
        [r.left, r.top, r.right, r.bottom]
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{},{}]", self.left, self.top, self.right, self.bottom)
    }
}

impl Rect {
    pub const fn new(left: u32, top: u32, right: u32, bottom: u32) -> Self {
        Rect {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn width(&self) -> u32 {
        self.right - self.left
    }

    pub fn height(&self) -> u32 {
        self.bottom - self.top
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    pub fn is_ordered(&self) -> bool {
        self.left <= self.right && self.top <= self.bottom
    }

    pub fn contains_point(&self, x: i64, y: i64) -> bool {
        x >= self.left as i64 && x < self.right as i64 && y >= self.top as i64 && y < self.bottom as i64
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.left >= self.left
            && other.top >= self.top
            && other.right <= self.right
            && other.bottom <= self.bottom
    }

    /// Integer center, rounded towards the top-left.
    pub fn center(&self) -> (u32, u32) {
        (
            self.left + self.width() / 2,
            self.top + self.height() / 2,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Container,
    Button,
    Text,
    Input,
    Image,
    Checkbox,
    List,
}

impl Role {
    fn tag(self) -> &'static str {
        match self {
            Role::Container | Role::List => "div",
            Role::Button => "button",
            Role::Text => "p",
            Role::Input => "input",
            Role::Image => "img",
            Role::Checkbox => "checkbox",
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One node of a screen's accessibility tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct A11yNode {
    pub id: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_desc: Option<String>,
    pub bounds: Rect,
    #[serde(default, skip_serializing_if = "is_false")]
    pub clickable: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub editable: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub scrollable: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<A11yNode>,
}

impl A11yNode {
    pub fn new(id: impl Into<String>, role: Role, bounds: Rect) -> Self {
        A11yNode {
            id: id.into(),
            role,
            text: None,
            content_desc: None,
            bounds,
            clickable: false,
            editable: false,
            scrollable: false,
            children: Vec::new(),
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn with_content_desc(mut self, desc: impl Into<String>) -> Self {
        self.content_desc = Some(desc.into());
        self
    }

    pub fn clickable(mut self) -> Self {
        self.clickable = true;
        self
    }

    pub fn editable(mut self) -> Self {
        self.editable = true;
        self
    }

    pub fn with_children(mut self, children: Vec<A11yNode>) -> Self {
        self.children = children;
        self
    }

    pub fn is_interactive(&self) -> bool {
        self.clickable || self.editable || self.scrollable
    }

    /// Checks bounds ordering, parent containment and id uniqueness.
    pub fn validate(&self) -> Result<(), A11yError> {
        let mut seen = HashSet::new();
        self.validate_inner(None, &mut seen)
    }

    fn validate_inner<'a>(
        &'a self,
        parent: Option<&Rect>,
        seen: &mut HashSet<&'a str>,
    ) -> Result<(), A11yError> {
        if self.id.is_empty() {
            return Err(A11yError::malformed("", "empty node id"));
        }
        if !seen.insert(self.id.as_str()) {
            return Err(A11yError::malformed(&self.id, "duplicate id"));
        }
        if !self.bounds.is_ordered() {
            return Err(A11yError::malformed(
                &self.id,
                format!("bounds {} are not ordered", self.bounds),
            ));
        }
        if let Some(p) = parent {
            if !p.contains_rect(&self.bounds) {
                return Err(A11yError::malformed(
                    &self.id,
                    format!("bounds {} lie outside parent bounds {}", self.bounds, p),
                ));
            }
        }
        for child in &self.children {
            child.validate_inner(Some(&self.bounds), seen)?;
        }
        Ok(())
    }

    /// Pre-order iterator over this node and all descendants.
    pub fn iter(&self) -> impl Iterator<Item = &A11yNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    pub fn node_count(&self) -> usize {
        self.iter().count()
    }

    pub fn find(&self, id: &str) -> Option<&A11yNode> {
        self.iter().find(|n| n.id == id)
    }

    /// Path from this node down to the deepest node containing `(x, y)`.
    ///
    /// Among overlapping siblings the later one wins, matching paint order.
    /// Empty when the point is outside this node.
    pub fn hit_path(&self, x: i64, y: i64) -> Vec<&A11yNode> {
        let mut path = Vec::new();
        if !self.bounds.contains_point(x, y) {
            return path;
        }
        let mut node = self;
        path.push(node);
        while let Some(child) = node
            .children
            .iter()
            .rev()
            .find(|c| c.bounds.contains_point(x, y))
        {
            path.push(child);
            node = child;
        }
        path
    }
}

/// Wire shape used while parsing, so that a missing `bounds` can be reported
/// against the node id instead of as a generic decode failure.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: Option<String>,
    role: Role,
    text: Option<String>,
    content_desc: Option<String>,
    bounds: Option<[i64; 4]>,
    #[serde(default)]
    clickable: bool,
    #[serde(default)]
    editable: bool,
    #[serde(default)]
    scrollable: bool,
    #[serde(default)]
    children: Vec<RawNode>,
}

impl RawNode {
    fn into_node(self) -> Result<A11yNode, A11yError> {
        let id = self
            .id
            .ok_or_else(|| A11yError::malformed("", "missing id"))?;
        let b = self
            .bounds
            .ok_or_else(|| A11yError::malformed(&id, "missing bounds"))?;
        if b.iter().any(|&v| v < 0 || v > u32::MAX as i64) {
            return Err(A11yError::malformed(&id, "bounds must be non-negative"));
        }
        let children = self
            .children
            .into_iter()
            .map(RawNode::into_node)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(A11yNode {
            id,
            role: self.role,
            text: self.text,
            content_desc: self.content_desc,
            bounds: Rect::new(b[0] as u32, b[1] as u32, b[2] as u32, b[3] as u32),
            clickable: self.clickable,
            editable: self.editable,
            scrollable: self.scrollable,
            children,
        })
    }
}

/// Parses a tree from its JSON document form and validates it.
pub fn parse_tree(doc: &str) -> Result<A11yNode, A11yError> {
    let value: serde_json::Value = serde_json::from_str(doc)
        .map_err(|e| A11yError::malformed("<document>", e.to_string()))?;
    parse_tree_value(value)
}

pub fn parse_tree_value(value: serde_json::Value) -> Result<A11yNode, A11yError> {
    let raw: RawNode = serde_json::from_value(value)
        .map_err(|e| A11yError::malformed("<document>", e.to_string()))?;
    let root = raw.into_node()?;
    root.validate()?;
    Ok(root)
}

/// Serializes a tree back to the document form accepted by [`parse_tree`].
pub fn serialize_tree(root: &A11yNode) -> String {
    serde_json::to_string(root).expect("tree serialization is infallible")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub id: String,
    pub bounds: Rect,
}

/// A tree together with its element indices and serialized DOM text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedTree {
    root: A11yNode,
    /// Position `k` holds the node that carries index `k`.
    entries: Vec<IndexEntry>,
    /// Pre-order flags: whether the n-th visited node is indexed.
    flags: Vec<bool>,
    dom_text: String,
}

impl IndexedTree {
    pub fn root(&self) -> &A11yNode {
        &self.root
    }

    pub fn dom_text(&self) -> &str {
        &self.dom_text
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The node id carrying index `k`.
    pub fn id_of(&self, index: u32) -> Option<&str> {
        self.entries.get(index as usize).map(|e| e.id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.entries
            .iter()
            .position(|e| e.id == id)
            .map(|p| p as u32)
    }

    pub fn entry(&self, index: u32) -> Option<&IndexEntry> {
        self.entries.get(index as usize)
    }

    /// Index → node id, in index order.
    pub fn index_map(&self) -> impl Iterator<Item = (u32, &str)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i as u32, e.id.as_str()))
    }

    /// One rect per requested index, in request order, duplicates kept.
    pub fn resolve_regions(&self, indices: &[u32]) -> Result<Vec<Rect>, A11yError> {
        indices
            .iter()
            .map(|&k| {
                self.entry(k)
                    .map(|e| e.bounds)
                    .ok_or(A11yError::UnknownIndex(k))
            })
            .collect()
    }
}

fn mark_indexable(node: &A11yNode, flags: &mut Vec<bool>) -> usize {
    let pos = flags.len();
    flags.push(false);
    let descendants: usize = node
        .children
        .iter()
        .map(|c| mark_indexable(c, flags))
        .sum();
    let indexed =
        node.role != Role::Container || node.is_interactive() || descendants >= 2;
    flags[pos] = indexed;
    descendants + usize::from(indexed)
}

/// Assigns element indices in pre-order.
///
/// A node is indexed when it is not a plain container, when it is
/// interactive, or when it is a container grouping at least two indexed
/// descendants (so whole groups stay selectable).
pub fn assign_indices(root: &A11yNode) -> IndexedTree {
    let mut flags = Vec::with_capacity(64);
    mark_indexable(root, &mut flags);
    let entries = root
        .iter()
        .zip(&flags)
        .filter(|(_, &f)| f)
        .map(|(n, _)| IndexEntry {
            id: n.id.clone(),
            bounds: n.bounds,
        })
        .collect();
    let mut tree = IndexedTree {
        root: root.clone(),
        entries,
        flags,
        dom_text: String::new(),
    };
    tree.dom_text = to_dom_text(&tree);
    tree
}

/// Renders the indexed tree as single-line nested markup.
pub fn to_dom_text(tree: &IndexedTree) -> String {
    let mut out = String::new();
    let mut visit = 0usize;
    let mut next_index = 0u32;
    write_node(
        &tree.root,
        &tree.flags,
        &mut visit,
        &mut next_index,
        &mut out,
    );
    out
}

fn write_node(
    node: &A11yNode,
    flags: &[bool],
    visit: &mut usize,
    next_index: &mut u32,
    out: &mut String,
) {
    let indexed = flags[*visit];
    *visit += 1;
    let tag = node.role.tag();
    out.push('<');
    out.push_str(tag);
    if node.role == Role::List {
        out.push_str(" class=\"list\"");
    }
    if indexed {
        out.push_str(&format!(" index={next_index}"));
        *next_index += 1;
    }
    if let Some(desc) = &node.content_desc {
        out.push_str(" alt=\"");
        escape_into(desc, true, out);
        out.push('"');
    }
    out.push('>');
    if let Some(text) = &node.text {
        escape_into(&truncate_text(text), false, out);
    }
    for child in &node.children {
        write_node(child, flags, visit, next_index, out);
    }
    out.push_str("</");
    out.push_str(tag);
    out.push('>');
}

fn truncate_text(text: &str) -> std::borrow::Cow<'_, str> {
    match text.char_indices().nth(MAX_DOM_TEXT_CHARS) {
        Some((cut, _)) => format!("{}…", &text[..cut]).into(),
        None => text.into(),
    }
}

fn escape_into(s: &str, attr: bool, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}
