//! Program graphs (call graphs and per-function CFGs) and their file formats.

mod dot;
mod targets;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

pub use dot::{dump_dot, parse_dot, parse_dot_with_entry};
pub use targets::{parse_targets, TargetPoint};

/// Identifier of an enhanced target sequence. Equal to the id of the target
/// point it was built for.
pub type EtsId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("node `{node}`: {msg}")]
    InvalidNode { node: String, msg: String },
    #[error("edge references unknown node `{0}`")]
    DanglingEdge(String),
    #[error("entry node `{0}` not found")]
    MissingEntry(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("targets: {0}")]
    Targets(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphKind {
    CallGraph,
    /// CFG of the named function.
    ControlFlow(String),
}

impl GraphKind {
    pub fn function(&self) -> Option<&str> {
        match self {
            GraphKind::CallGraph => None,
            GraphKind::ControlFlow(f) => Some(f),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::CallGraph => write!(f, "cg"),
            GraphKind::ControlFlow(func) => write!(f, "cfg:{func}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLocation {
    pub file: String,
    pub start_line: u32,
    pub end_line: u32,
    pub start_column: Option<u32>,
}

impl SourceLocation {
    pub fn new(file: impl Into<String>, start_line: u32, end_line: u32) -> Self {
        SourceLocation {
            file: file.into(),
            start_line,
            end_line,
            start_column: None,
        }
    }

    pub fn contains_line(&self, line: u32) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    /// Distance in lines from `line` to the nearest boundary of this range,
    /// zero when contained.
    pub fn line_distance(&self, line: u32) -> u32 {
        if line < self.start_line {
            self.start_line - line
        } else {
            line.saturating_sub(self.end_line)
        }
    }

    /// Whether `path` names the same source file. Paths are compared by
    /// trailing components so `main.c` matches `/home/user/example/main.c`.
    pub fn matches_file(&self, path: &str) -> bool {
        path_suffix_match(&self.file, path)
    }

    fn validate(&self) -> Result<(), String> {
        if self.file.is_empty() {
            return Err("empty filename".into());
        }
        if self.start_line == 0 {
            return Err("startline must be positive".into());
        }
        if self.start_line > self.end_line {
            return Err(format!(
                "startline {} exceeds endline {}",
                self.start_line, self.end_line
            ));
        }
        Ok(())
    }
}

fn path_suffix_match(a: &str, b: &str) -> bool {
    let split = |p: &str| -> Vec<String> {
        p.split(['/', '\\'])
            .filter(|c| !c.is_empty() && *c != ".")
            .map(str::to_owned)
            .collect()
    };
    let (a, b) = (split(a), split(b));
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let n = a.len().min(b.len());
    a[a.len() - n..] == b[b.len() - n..]
}

/// Role of a node inside one ETS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Membership {
    TargetPoint,
    Intermediate,
}

impl Membership {
    pub fn as_str(self) -> &'static str {
        match self {
            Membership::TargetPoint => "point",
            Membership::Intermediate => "member",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "point" => Some(Membership::TargetPoint),
            "member" => Some(Membership::Intermediate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: String,
    /// Raw `label` attribute, e.g. `{foo}` for record-shaped nodes.
    pub label: Option<String>,
    pub location: Option<SourceLocation>,
    pub memberships: BTreeMap<EtsId, Membership>,
    pub weights: BTreeMap<EtsId, f64>,
    /// Attributes this crate does not interpret, in input order.
    pub attrs: Vec<(String, String)>,
}

impl GraphNode {
    pub fn new(id: impl Into<String>) -> Self {
        GraphNode {
            id: id.into(),
            label: None,
            location: None,
            memberships: BTreeMap::new(),
            weights: BTreeMap::new(),
            attrs: Vec::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_location(mut self, loc: SourceLocation) -> Self {
        self.location = Some(loc);
        self
    }

    /// Function or block name: the label with record braces stripped, or the
    /// node id when there is no label.
    pub fn name(&self) -> &str {
        match &self.label {
            Some(l) => {
                let t = l.trim();
                let t = t.strip_prefix('{').unwrap_or(t);
                let t = t.strip_suffix('}').unwrap_or(t);
                t.split('|').next().unwrap_or(t).trim()
            }
            None => &self.id,
        }
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub(crate) fn validate(&self) -> Result<(), GraphError> {
        let err = |msg: String| GraphError::InvalidNode {
            node: self.id.clone(),
            msg,
        };
        if let Some(loc) = &self.location {
            loc.validate().map_err(err)?;
        }
        for (ets, w) in &self.weights {
            let Some(kind) = self.memberships.get(ets) else {
                return Err(err(format!("weight for ETS {ets} without membership")));
            };
            if !(*w > 0.0 && *w <= 1.0) {
                return Err(err(format!("weight {w} for ETS {ets} outside (0, 1]")));
            }
            if *kind == Membership::TargetPoint && *w != 1.0 {
                return Err(err(format!("target point of ETS {ets} has weight {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub indirect: bool,
    pub from_port: Option<String>,
    pub to_port: Option<String>,
    pub attrs: Vec<(String, String)>,
}

impl GraphEdge {
    pub fn direct(from: impl Into<String>, to: impl Into<String>) -> Self {
        GraphEdge {
            from: from.into(),
            to: to.into(),
            indirect: false,
            from_port: None,
            to_port: None,
            attrs: Vec::new(),
        }
    }

    pub fn indirect(from: impl Into<String>, to: impl Into<String>) -> Self {
        GraphEdge {
            indirect: true,
            ..GraphEdge::direct(from, to)
        }
    }

    /// Edge length used by proximity distances.
    pub fn cost(&self) -> u32 {
        if self.indirect {
            2
        } else {
            1
        }
    }
}

/// A call graph or CFG with source locations and ETS annotations.
#[derive(Debug, Clone)]
pub struct ProgramGraph {
    pub kind: GraphKind,
    pub name: Option<String>,
    /// Graph-level attributes other than `entry`.
    pub attrs: Vec<(String, String)>,
    nodes: Vec<GraphNode>,
    index: HashMap<String, usize>,
    edges: Vec<GraphEdge>,
    entry: String,
}

impl PartialEq for ProgramGraph {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.name == other.name
            && self.attrs == other.attrs
            && self.nodes == other.nodes
            && self.edges == other.edges
            && self.entry == other.entry
    }
}

impl ProgramGraph {
    /// Builds a graph and checks its invariants.
    pub fn new(
        kind: GraphKind,
        nodes: Vec<GraphNode>,
        edges: Vec<GraphEdge>,
        entry: impl Into<String>,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(n.id.clone()));
            }
            n.validate()?;
        }
        for e in &edges {
            for end in [&e.from, &e.to] {
                if !index.contains_key(end) {
                    return Err(GraphError::DanglingEdge(end.clone()));
                }
            }
        }
        let entry = entry.into();
        if !index.contains_key(&entry) {
            return Err(GraphError::MissingEntry(entry));
        }
        Ok(ProgramGraph {
            kind,
            name: None,
            attrs: Vec::new(),
            nodes,
            index,
            edges,
            entry,
        })
    }

    pub fn entry(&self) -> &str {
        &self.entry
    }

    pub fn set_entry(&mut self, entry: &str) -> Result<(), GraphError> {
        if !self.contains(entry) {
            return Err(GraphError::MissingEntry(entry.to_owned()));
        }
        self.entry = entry.to_owned();
        Ok(())
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut GraphNode> {
        self.index.get(id).map(|&i| &mut self.nodes[i])
    }

    /// First node whose name (see [`GraphNode::name`]) equals `name`.
    pub fn find_by_name(&self, name: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.name() == name)
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    /// Adds an edge unless one with the same endpoints already exists.
    /// Returns whether the edge was added.
    pub fn add_edge(&mut self, edge: GraphEdge) -> Result<bool, GraphError> {
        for end in [&edge.from, &edge.to] {
            if !self.contains(end) {
                return Err(GraphError::DanglingEdge(end.clone()));
            }
        }
        if self.has_edge(&edge.from, &edge.to) {
            return Ok(false);
        }
        self.edges.push(edge);
        Ok(true)
    }

    /// Removes all ETS annotations from every node.
    pub fn clear_annotations(&mut self) {
        for n in &mut self.nodes {
            n.memberships.clear();
            n.weights.clear();
        }
    }

    /// Successor lists by node index, in edge order, one entry per edge.
    pub fn successors(&self) -> Vec<Vec<(usize, u32)>> {
        let mut succ = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            succ[self.index[&e.from]].push((self.index[&e.to], e.cost()));
        }
        succ
    }

    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            pred[self.index[&e.to]].push(self.index[&e.from]);
        }
        pred
    }

    /// Distinct successor ids of `id`, in first-edge order.
    pub fn distinct_successors(&self, id: &str) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in self.edges.iter().filter(|e| e.from == id) {
            if !out.contains(&e.to.as_str()) {
                out.push(&e.to);
            }
        }
        out
    }
}
