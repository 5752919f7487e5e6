//! Directed control-flow-graph model with a line-oriented text format.
//!
//! A [`Cfg`] is immutable after construction: node ids are opaque strings,
//! edges are directed, and the exit set is always derived (a node is an exit
//! exactly when its out-degree is 0). Construction goes through [`CfgDraft`],
//! which can hold arbitrary raw parts; [`CfgDraft::validate`] reports every
//! rule violation as data, and [`Cfg::from_draft`] refuses drafts with any.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Class label attached to a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphLabel {
    Benign,
    Malicious,
}

impl GraphLabel {
    /// Class index used by the classifier (benign = 0, malicious = 1).
    pub fn class_index(self) -> usize {
        match self {
            GraphLabel::Benign => 0,
            GraphLabel::Malicious => 1,
        }
    }

    pub fn from_class_index(idx: usize) -> Option<GraphLabel> {
        match idx {
            0 => Some(GraphLabel::Benign),
            1 => Some(GraphLabel::Malicious),
            _ => None,
        }
    }

    pub fn opposite(self) -> GraphLabel {
        match self {
            GraphLabel::Benign => GraphLabel::Malicious,
            GraphLabel::Malicious => GraphLabel::Benign,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GraphLabel::Benign => "benign",
            GraphLabel::Malicious => "malicious",
        }
    }
}

impl fmt::Display for GraphLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// Returns true if `id` is a legal node or graph identifier
/// (`[A-Za-z0-9_:.-]+`).
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '.' | '-'))
}

/// A single structural rule violation, reported as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyGraph,
    BadId(String),
    DuplicateNode(String),
    DuplicateEdge(String, String),
    UndeclaredNode(String),
    EntrySelfLoop(String),
    /// A declared exit whose out-degree is not 0.
    ExitHasSuccessor(String),
    /// A node with out-degree 0 missing from the declared exit set.
    MissingExit(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGraph => write!(f, "empty-graph"),
            Violation::BadId(id) => write!(f, "bad-id: {id}"),
            Violation::DuplicateNode(id) => write!(f, "duplicate-node: {id}"),
            Violation::DuplicateEdge(s, d) => write!(f, "duplicate-edge: {s} {d}"),
            Violation::UndeclaredNode(id) => write!(f, "undeclared-node: {id}"),
            Violation::EntrySelfLoop(id) => write!(f, "entry-self-loop: {id}"),
            Violation::ExitHasSuccessor(id) => write!(f, "exit-has-successor: {id}"),
            Violation::MissingExit(id) => write!(f, "missing-exit: {id}"),
        }
    }
}

/// Raw graph parts prior to validation.
///
/// `exits` is `None` when the exit set should be derived from out-degrees
/// (the normal case); populating it lets validation cross-check a stored
/// exit set against the derived one.
#[derive(Debug, Clone, Default)]
pub struct CfgDraft {
    pub name: String,
    pub label: Option<GraphLabel>,
    pub entry: String,
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub exits: Option<Vec<String>>,
}

impl CfgDraft {
    /// Checks every structural invariant and returns all violations found.
    /// An empty result means [`Cfg::from_draft`] will succeed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            out.push(Violation::EmptyGraph);
        }
        if !self.name.is_empty() && !is_valid_id(&self.name) {
            out.push(Violation::BadId(self.name.clone()));
        }

        let mut declared: HashSet<&str> = HashSet::with_capacity(self.nodes.len());
        for id in &self.nodes {
            if !is_valid_id(id) {
                out.push(Violation::BadId(id.clone()));
            }
            if !declared.insert(id.as_str()) {
                out.push(Violation::DuplicateNode(id.clone()));
            }
        }

        if !self.nodes.is_empty() && !declared.contains(self.entry.as_str()) {
            out.push(Violation::UndeclaredNode(self.entry.clone()));
        }

        let mut seen_edges: HashSet<(&str, &str)> = HashSet::with_capacity(self.edges.len());
        let mut has_successor: HashSet<&str> = HashSet::new();
        for (src, dst) in &self.edges {
            for end in [src, dst] {
                if !declared.contains(end.as_str()) {
                    out.push(Violation::UndeclaredNode(end.clone()));
                }
            }
            if !seen_edges.insert((src.as_str(), dst.as_str())) {
                out.push(Violation::DuplicateEdge(src.clone(), dst.clone()));
            }
            if src == dst && *src == self.entry {
                out.push(Violation::EntrySelfLoop(src.clone()));
            }
            has_successor.insert(src.as_str());
        }

        if let Some(exits) = &self.exits {
            let exit_set: HashSet<&str> = exits.iter().map(String::as_str).collect();
            for id in exits {
                if !declared.contains(id.as_str()) {
                    out.push(Violation::UndeclaredNode(id.clone()));
                } else if has_successor.contains(id.as_str()) {
                    out.push(Violation::ExitHasSuccessor(id.clone()));
                }
            }
            for id in &self.nodes {
                if declared.contains(id.as_str())
                    && !has_successor.contains(id.as_str())
                    && !exit_set.contains(id.as_str())
                {
                    out.push(Violation::MissingExit(id.clone()));
                }
            }
        }

        out
    }
}

/// An immutable validated control flow graph.
///
/// Nodes are stored sorted lexicographically, so structural equality and
/// serialization are independent of construction order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfg {
    name: String,
    label: Option<GraphLabel>,
    nodes: Vec<String>,
    entry: usize,
    edges: Vec<(usize, usize)>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    exits: Vec<usize>,
}

impl Cfg {
    /// Builds a graph from parts, deriving the exit set.
    pub fn new(
        name: impl Into<String>,
        label: Option<GraphLabel>,
        entry: impl Into<String>,
        nodes: Vec<String>,
        edges: Vec<(String, String)>,
    ) -> Result<Cfg, Vec<Violation>> {
        Cfg::from_draft(CfgDraft {
            name: name.into(),
            label,
            entry: entry.into(),
            nodes,
            edges,
            exits: None,
        })
    }

    pub fn from_draft(draft: CfgDraft) -> Result<Cfg, Vec<Violation>> {
        let violations = draft.validate();
        if !violations.is_empty() {
            return Err(violations);
        }

        let mut nodes = draft.nodes;
        nodes.sort_unstable();
        let index: HashMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();

        let entry = index[draft.entry.as_str()];
        let mut edges: Vec<(usize, usize)> = draft
            .edges
            .iter()
            .map(|(s, d)| (index[s.as_str()], index[d.as_str()]))
            .collect();
        edges.sort_unstable();

        let n = nodes.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &(s, d) in &edges {
            succ[s].push(d);
            pred[d].push(s);
        }
        let exits = (0..n).filter(|&v| succ[v].is_empty()).collect();

        Ok(Cfg {
            name: draft.name,
            label: draft.label,
            nodes,
            entry,
            edges,
            succ,
            pred,
            exits,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn label(&self) -> Option<GraphLabel> {
        self.label
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Node ids in sorted order; indices into this slice are the node
    /// indices used by all other accessors.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_id(&self, idx: usize) -> &str {
        &self.nodes[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(id)).ok()
    }

    pub fn entry(&self) -> usize {
        self.entry
    }

    pub fn entry_id(&self) -> &str {
        &self.nodes[self.entry]
    }

    /// Edges as sorted (src, dst) index pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn successors(&self, idx: usize) -> &[usize] {
        &self.succ[idx]
    }

    pub fn predecessors(&self, idx: usize) -> &[usize] {
        &self.pred[idx]
    }

    pub fn out_degree(&self, idx: usize) -> usize {
        self.succ[idx].len()
    }

    pub fn in_degree(&self, idx: usize) -> usize {
        self.pred[idx].len()
    }

    /// Exit node indices (out-degree 0), sorted.
    pub fn exits(&self) -> &[usize] {
        &self.exits
    }

    pub fn exit_ids(&self) -> impl Iterator<Item = &str> {
        self.exits.iter().map(|&i| self.nodes[i].as_str())
    }

    pub fn with_label(mut self, label: Option<GraphLabel>) -> Cfg {
        self.label = label;
        self
    }

    /// Node indices reachable from `start` (including `start`).
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.succ[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Renders the graph in the line-oriented text format. Deterministic:
    /// a pure function of graph structure.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("cfg ");
        out.push_str(&self.name);
        out.push('\n');
        out.push_str("entry ");
        out.push_str(self.entry_id());
        out.push('\n');
        out.push_str("label ");
        out.push_str(match self.label {
            Some(l) => l.as_str(),
            None => "unlabeled",
        });
        out.push('\n');
        for id in &self.nodes {
            out.push_str("node ");
            out.push_str(id);
            out.push('\n');
        }
        for &(s, d) in &self.edges {
            out.push_str("edge ");
            out.push_str(&self.nodes[s]);
            out.push(' ');
            out.push_str(&self.nodes[d]);
            out.push('\n');
        }
        out
    }
}

/// Failure modes of [`parse_cfg`]. Line and column numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("missing entry declaration")]
    MissingEntry,
    #[error("line {line}, column {col}: edge references undeclared node {node}")]
    UndeclaredNode {
        line: usize,
        col: usize,
        node: String,
    },
    #[error("empty graph: no node declarations")]
    EmptyGraph,
    #[error("invalid graph: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Serializes a graph to the text format. Alias of [`Cfg::to_text`] kept as
/// the counterpart of [`parse_cfg`].
pub fn serialize_cfg(g: &Cfg) -> String {
    g.to_text()
}

/// Parses the line-oriented graph text format:
///
/// ```text
/// cfg <graph-name>
/// entry <node-id>
/// label <benign|malicious|unlabeled>
/// node <node-id>      (zero or more)
/// edge <src> <dst>    (zero or more)
/// ```
///
/// `#` starts a comment running to end of line; blank lines are ignored.
pub fn parse_cfg(text: &str) -> Result<Cfg, ParseError> {
    #[derive(PartialEq, PartialOrd)]
    enum Section {
        Header,
        Entry,
        Label,
        Nodes,
        Edges,
    }

    let mut section = Section::Header;
    let mut name = String::new();
    let mut entry: Option<String> = None;
    let mut label: Option<Option<GraphLabel>> = None;
    let mut nodes: Vec<String> = Vec::new();
    let mut declared: HashSet<String> = HashSet::new();
    let mut edges: Vec<(String, String)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }

        let mut tokens = tokenize(content);
        let (keyword, _) = tokens.next().expect("non-blank line has a token");

        match keyword {
            "cfg" => {
                if section > Section::Header {
                    return Err(syntax(line, 1, "duplicate cfg header"));
                }
                let (value, col) = expect_token(&mut tokens, line, content.len(), "graph name")?;
                check_id(value, line, col)?;
                expect_end(&mut tokens, line)?;
                name = value.to_string();
                section = Section::Entry;
            }
            "entry" => {
                if section == Section::Header {
                    return Err(syntax(line, 1, "expected `cfg <graph-name>` header first"));
                }
                if section > Section::Entry {
                    return Err(syntax(line, 1, "duplicate entry declaration"));
                }
                let (value, col) = expect_token(&mut tokens, line, content.len(), "entry node id")?;
                check_id(value, line, col)?;
                expect_end(&mut tokens, line)?;
                entry = Some(value.to_string());
                section = Section::Label;
            }
            "label" => {
                match section {
                    Section::Header => return Err(syntax(line, 1, "expected `cfg <graph-name>` header first")),
                    Section::Entry => return Err(ParseError::MissingEntry),
                    Section::Nodes | Section::Edges => {
                        return Err(syntax(line, 1, "duplicate label declaration"))
                    }
                    Section::Label => {}
                }
                let (value, col) = expect_token(&mut tokens, line, content.len(), "label value")?;
                expect_end(&mut tokens, line)?;
                label = Some(match value {
                    "benign" => Some(GraphLabel::Benign),
                    "malicious" => Some(GraphLabel::Malicious),
                    "unlabeled" => None,
                    other => {
                        return Err(syntax(
                            line,
                            col,
                            &format!("unknown label `{other}` (expected benign, malicious, or unlabeled)"),
                        ))
                    }
                });
                section = Section::Nodes;
            }
            "node" => {
                match section {
                    Section::Header => return Err(syntax(line, 1, "expected `cfg <graph-name>` header first")),
                    Section::Entry => return Err(ParseError::MissingEntry),
                    Section::Label => return Err(syntax(line, 1, "expected label declaration")),
                    Section::Edges => return Err(syntax(line, 1, "node declaration after edge section")),
                    Section::Nodes => {}
                }
                let (value, col) = expect_token(&mut tokens, line, content.len(), "node id")?;
                check_id(value, line, col)?;
                expect_end(&mut tokens, line)?;
                nodes.push(value.to_string());
                declared.insert(value.to_string());
            }
            "edge" => {
                match section {
                    Section::Header => return Err(syntax(line, 1, "expected `cfg <graph-name>` header first")),
                    Section::Entry => return Err(ParseError::MissingEntry),
                    Section::Label => return Err(syntax(line, 1, "expected label declaration")),
                    Section::Nodes | Section::Edges => {}
                }
                section = Section::Edges;
                let (src, src_col) =
                    expect_token(&mut tokens, line, content.len(), "edge source")?;
                let (dst, dst_col) =
                    expect_token(&mut tokens, line, content.len(), "edge destination")?;
                check_id(src, line, src_col)?;
                check_id(dst, line, dst_col)?;
                expect_end(&mut tokens, line)?;
                if !declared.contains(src) {
                    return Err(ParseError::UndeclaredNode {
                        line,
                        col: src_col,
                        node: src.to_string(),
                    });
                }
                if !declared.contains(dst) {
                    return Err(ParseError::UndeclaredNode {
                        line,
                        col: dst_col,
                        node: dst.to_string(),
                    });
                }
                edges.push((src.to_string(), dst.to_string()));
            }
            other => {
                return Err(syntax(line, 1, &format!("unknown directive `{other}`")));
            }
        }
    }

    if section == Section::Header {
        return Err(syntax(1, 1, "missing `cfg <graph-name>` header"));
    }
    let entry = entry.ok_or(ParseError::MissingEntry)?;
    let label = match label {
        Some(l) => l,
        None => return Err(syntax(1, 1, "missing label declaration")),
    };
    if nodes.is_empty() {
        return Err(ParseError::EmptyGraph);
    }

    Cfg::from_draft(CfgDraft {
        name,
        label,
        entry,
        nodes,
        edges,
        exits: None,
    })
    .map_err(ParseError::Invalid)
}

/// Iterator over (token, 1-based column) pairs of a line.
fn tokenize(content: &str) -> impl Iterator<Item = (&str, usize)> {
    content.split_whitespace().map(move |tok| {
        let col = offset_of(content, tok) + 1;
        (tok, col)
    })
}

fn offset_of(haystack: &str, needle: &str) -> usize {
    (needle.as_ptr() as usize) - (haystack.as_ptr() as usize)
}

fn expect_token<'a>(
    tokens: &mut impl Iterator<Item = (&'a str, usize)>,
    line: usize,
    line_len: usize,
    what: &str,
) -> Result<(&'a str, usize), ParseError> {
    tokens
        .next()
        .ok_or_else(|| syntax(line, line_len + 1, &format!("expected {what}")))
}

fn expect_end<'a>(
    tokens: &mut impl Iterator<Item = (&'a str, usize)>,
    line: usize,
) -> Result<(), ParseError> {
    match tokens.next() {
        Some((tok, col)) => Err(syntax(line, col, &format!("unexpected token `{tok}`"))),
        None => Ok(()),
    }
}

fn check_id(id: &str, line: usize, col: usize) -> Result<(), ParseError> {
    if is_valid_id(id) {
        Ok(())
    } else {
        Err(syntax(line, col, &format!("invalid identifier `{id}`")))
    }
}

fn syntax(line: usize, col: usize, message: &str) -> ParseError {
    ParseError::Syntax {
        line,
        col,
        message: message.to_string(),
    }
}

/// Convenience used by corpus generation and splicing: collect the node id
/// set of a graph.
pub fn node_id_set(g: &Cfg) -> BTreeSet<String> {
    g.nodes().iter().cloned().collect()
}
