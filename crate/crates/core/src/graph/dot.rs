//! Reader and writer for the annotated DOT dialect.
//!
//! Only the subset emitted by graph dumpers is accepted: one `digraph` with
//! graph attributes, node statements and edge chains. Recognized node
//! attributes are `filename`, `startline`, `endline`, `startcolumn`, `label`
//! and the ETS annotations `ts_kind`/`ts_numbers` and `w_val`/`w_numbers`,
//! whose values are `/`-separated lists matched by position. Edges may carry
//! an `indirect` attribute, written bare (`[indirect]`) or with a value.
//! Anything else is kept as an opaque attribute and written back unchanged.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{
    EtsId, GraphEdge, GraphError, GraphKind, GraphNode, Membership, ProgramGraph, SourceLocation,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Semi,
    Comma,
    Colon,
    Arrow,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || !c.is_ascii()
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> GraphError {
        GraphError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c == Some('\n') {
            self.line += 1;
        }
        c
    }

    fn skip_trivia(&mut self) -> Result<(), GraphError> {
        let mut at_line_start = self.line == 1;
        loop {
            match self.chars.peek().copied() {
                Some('\n') => {
                    self.bump();
                    at_line_start = true;
                }
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') if at_line_start => {
                    while !matches!(self.chars.peek(), None | Some('\n')) {
                        self.bump();
                    }
                }
                Some('/') => {
                    let mut look = self.chars.clone();
                    look.next();
                    match look.next() {
                        Some('/') => {
                            while !matches!(self.chars.peek(), None | Some('\n')) {
                                self.bump();
                            }
                        }
                        Some('*') => {
                            self.bump();
                            self.bump();
                            let start = self.line;
                            loop {
                                match self.bump() {
                                    None => {
                                        return Err(GraphError::Parse {
                                            line: start,
                                            msg: "unterminated comment".into(),
                                        })
                                    }
                                    Some('*') if self.chars.peek() == Some(&'/') => {
                                        self.bump();
                                        break;
                                    }
                                    _ => {}
                                }
                            }
                        }
                        _ => return Ok(()),
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    /// Next token with the line it started on.
    fn next_token(&mut self) -> Result<Option<(Tok, usize)>, GraphError> {
        self.skip_trivia()?;
        let line = self.line;
        let Some(c) = self.bump() else {
            return Ok(None);
        };
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '=' => Tok::Eq,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '-' if self.chars.peek() == Some(&'>') => {
                self.bump();
                Tok::Arrow
            }
            '-' if self.chars.peek() == Some(&'-') => {
                return Err(self.err("undirected edges are not supported"));
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => {
                            return Err(GraphError::Parse {
                                line,
                                msg: "unterminated string".into(),
                            })
                        }
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('\n') => {}
                            Some(other) => {
                                s.push('\\');
                                s.push(other);
                            }
                            None => {
                                return Err(GraphError::Parse {
                                    line,
                                    msg: "unterminated string".into(),
                                })
                            }
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                Tok::Id(s)
            }
            '<' => return Err(self.err("HTML labels are not supported")),
            c if is_id_char(c) || c == '-' => {
                let mut s = String::from(c);
                while let Some(&n) = self.chars.peek() {
                    if is_id_char(n) {
                        s.push(n);
                        self.bump();
                    } else {
                        break;
                    }
                }
                if s == "-" {
                    return Err(self.err("unexpected `-`"));
                }
                Tok::Id(s)
            }
            other => return Err(self.err(format!("unexpected character `{other}`"))),
        };
        Ok(Some((tok, line)))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(Tok, usize)>,
    last_line: usize,
}

type AttrList = Vec<(String, String)>;
/// `(from, from_port, to, to_port, attrs)`.
type RawEdge = (String, Option<String>, String, Option<String>, AttrList);

#[derive(Default)]
struct RawGraph {
    name: Option<String>,
    attrs: AttrList,
    nodes: Vec<(String, AttrList)>,
    node_index: HashMap<String, usize>,
    edges: Vec<RawEdge>,
}

impl RawGraph {
    fn touch_node(&mut self, id: &str) -> usize {
        if let Some(&i) = self.node_index.get(id) {
            return i;
        }
        self.nodes.push((id.to_owned(), Vec::new()));
        self.node_index.insert(id.to_owned(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }
}

fn merge_attrs(into: &mut AttrList, from: AttrList) {
    for (k, v) in from {
        match into.iter_mut().find(|(ek, _)| *ek == k) {
            Some(slot) => slot.1 = v,
            None => into.push((k, v)),
        }
    }
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            lexer: Lexer::new(text),
            peeked: None,
            last_line: 1,
        }
    }

    fn peek(&mut self) -> Result<Option<&Tok>, GraphError> {
        if self.peeked.is_none() {
            self.peeked = self.lexer.next_token()?;
        }
        Ok(self.peeked.as_ref().map(|(t, _)| t))
    }

    fn next(&mut self) -> Result<Option<Tok>, GraphError> {
        self.peek()?;
        Ok(self.peeked.take().map(|(t, line)| {
            self.last_line = line;
            t
        }))
    }

    fn err(&self, msg: impl Into<String>) -> GraphError {
        GraphError::Parse {
            line: self.last_line,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), GraphError> {
        match self.next()? {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(self.err(format!("expected {what}, found {t:?}"))),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn id(&mut self, what: &str) -> Result<String, GraphError> {
        match self.next()? {
            Some(Tok::Id(s)) => Ok(s),
            Some(t) => Err(self.err(format!("expected {what}, found {t:?}"))),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn graph(&mut self) -> Result<RawGraph, GraphError> {
        let mut raw = RawGraph::default();
        let mut kw = self.id("`digraph`")?;
        if kw.eq_ignore_ascii_case("strict") {
            kw = self.id("`digraph`")?;
        }
        if kw.eq_ignore_ascii_case("graph") {
            return Err(self.err("undirected graphs are not supported"));
        }
        if !kw.eq_ignore_ascii_case("digraph") {
            return Err(self.err(format!("expected `digraph`, found `{kw}`")));
        }
        if let Some(Tok::Id(_)) = self.peek()? {
            raw.name = Some(self.id("graph name")?);
        }
        self.expect(Tok::LBrace, "`{`")?;
        loop {
            match self.peek()? {
                None => return Err(self.err("unexpected end of input, missing `}`")),
                Some(Tok::RBrace) => {
                    self.next()?;
                    break;
                }
                Some(Tok::Semi) => {
                    self.next()?;
                }
                _ => self.statement(&mut raw)?,
            }
        }
        if self.next()?.is_some() {
            return Err(self.err("trailing content after graph"));
        }
        Ok(raw)
    }

    fn endpoint(&mut self) -> Result<(String, Option<String>), GraphError> {
        let id = self.id("node id")?;
        if self.peek()? == Some(&Tok::Colon) {
            self.next()?;
            let mut port = self.id("port")?;
            if self.peek()? == Some(&Tok::Colon) {
                self.next()?;
                port.push(':');
                port.push_str(&self.id("compass point")?);
            }
            return Ok((id, Some(port)));
        }
        Ok((id, None))
    }

    fn statement(&mut self, raw: &mut RawGraph) -> Result<(), GraphError> {
        let (first, first_port) = self.endpoint()?;
        let lower = first.to_ascii_lowercase();
        if first_port.is_none() && (lower == "subgraph" || first == "{") {
            return Err(self.err("subgraphs are not supported"));
        }
        match self.peek()? {
            Some(Tok::Eq) => {
                self.next()?;
                let value = self.id("attribute value")?;
                merge_attrs(&mut raw.attrs, vec![(first, value)]);
            }
            Some(Tok::Arrow) => {
                let mut chain = vec![(first, first_port)];
                while self.peek()? == Some(&Tok::Arrow) {
                    self.next()?;
                    chain.push(self.endpoint()?);
                }
                let attrs = self.attr_lists()?;
                for (id, _) in &chain {
                    raw.touch_node(id);
                }
                for pair in chain.windows(2) {
                    raw.edges.push((
                        pair[0].0.clone(),
                        pair[0].1.clone(),
                        pair[1].0.clone(),
                        pair[1].1.clone(),
                        attrs.clone(),
                    ));
                }
            }
            _ => {
                let attrs = self.attr_lists()?;
                match lower.as_str() {
                    "graph" if first_port.is_none() => merge_attrs(&mut raw.attrs, attrs),
                    "node" | "edge" if first_port.is_none() => {
                        return Err(
                            self.err(format!("default `{first}` attributes are not supported"))
                        )
                    }
                    _ => {
                        let i = raw.touch_node(&first);
                        merge_attrs(&mut raw.nodes[i].1, attrs);
                    }
                }
            }
        }
        if self.peek()? == Some(&Tok::Semi) {
            self.next()?;
        }
        Ok(())
    }

    fn attr_lists(&mut self) -> Result<AttrList, GraphError> {
        let mut out = Vec::new();
        while self.peek()? == Some(&Tok::LBracket) {
            self.next()?;
            loop {
                match self.peek()? {
                    Some(Tok::RBracket) => {
                        self.next()?;
                        break;
                    }
                    Some(Tok::Comma) | Some(Tok::Semi) => {
                        self.next()?;
                    }
                    _ => {
                        let key = self.id("attribute name")?;
                        let value = if self.peek()? == Some(&Tok::Eq) {
                            self.next()?;
                            self.id("attribute value")?
                        } else {
                            "true".to_owned()
                        };
                        merge_attrs(&mut out, vec![(key, value)]);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn split_multi(v: &str) -> Vec<&str> {
    if v.trim().is_empty() {
        Vec::new()
    } else {
        v.split('/').map(str::trim).collect()
    }
}

fn decode_node(id: String, attrs: AttrList) -> Result<GraphNode, GraphError> {
    let bad = |msg: String| GraphError::InvalidNode {
        node: id.clone(),
        msg,
    };
    let mut node = GraphNode::new(id.clone());
    let mut filename = None;
    let mut start = None;
    let mut end = None;
    let mut column = None;
    let mut ts_kind = None;
    let mut ts_numbers = None;
    let mut w_val = None;
    let mut w_numbers = None;
    let parse_u32 = |key: &str, v: &str| -> Result<u32, GraphError> {
        v.trim()
            .parse::<u32>()
            .map_err(|_| bad(format!("`{key}` is not a non-negative integer: `{v}`")))
    };
    for (k, v) in attrs {
        match k.as_str() {
            "filename" => filename = Some(v),
            "startline" => start = Some(parse_u32(&k, &v)?),
            "endline" => end = Some(parse_u32(&k, &v)?),
            "startcolumn" => column = Some(parse_u32(&k, &v)?),
            "label" => node.label = Some(v),
            "ts_kind" => ts_kind = Some(v),
            "ts_numbers" => ts_numbers = Some(v),
            "w_val" => w_val = Some(v),
            "w_numbers" => w_numbers = Some(v),
            _ => node.attrs.push((k, v)),
        }
    }
    match (filename, start) {
        (Some(file), Some(start)) => {
            node.location = Some(SourceLocation {
                file,
                start_line: start,
                end_line: end.unwrap_or(start),
                start_column: column,
            });
        }
        (None, None) if end.is_none() && column.is_none() => {}
        (None, _) => return Err(bad("line attributes without `filename`".into())),
        (Some(_), None) => return Err(bad("`filename` without `startline`".into())),
    }

    let kinds = ts_kind.as_deref().map(split_multi).unwrap_or_default();
    let numbers = ts_numbers.as_deref().map(split_multi).unwrap_or_default();
    if kinds.len() != numbers.len() {
        return Err(bad(format!(
            "`ts_kind` has {} values but `ts_numbers` has {}",
            kinds.len(),
            numbers.len()
        )));
    }
    for (k, n) in kinds.iter().zip(&numbers) {
        let kind = Membership::parse(k).ok_or_else(|| bad(format!("unknown ts_kind `{k}`")))?;
        let ets: EtsId = n
            .parse()
            .map_err(|_| bad(format!("bad ETS number `{n}`")))?;
        if node.memberships.insert(ets, kind).is_some() {
            return Err(bad(format!("ETS {ets} listed twice in `ts_numbers`")));
        }
    }
    let vals = w_val.as_deref().map(split_multi).unwrap_or_default();
    let wnums = w_numbers.as_deref().map(split_multi).unwrap_or_default();
    if vals.len() != wnums.len() {
        return Err(bad(format!(
            "`w_val` has {} values but `w_numbers` has {}",
            vals.len(),
            wnums.len()
        )));
    }
    for (v, n) in vals.iter().zip(&wnums) {
        let w: f64 = v.parse().map_err(|_| bad(format!("bad weight `{v}`")))?;
        let ets: EtsId = n
            .parse()
            .map_err(|_| bad(format!("bad ETS number `{n}`")))?;
        if node.weights.insert(ets, w).is_some() {
            return Err(bad(format!("ETS {ets} listed twice in `w_numbers`")));
        }
    }
    Ok(node)
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Parses a DOT digraph. The entry node is taken from the graph attribute
/// `entry` when present, otherwise the node named `main` for call graphs and
/// the first declared node for CFGs.
pub fn parse_dot(text: &str, kind: GraphKind) -> Result<ProgramGraph, GraphError> {
    parse_dot_with_entry(text, kind, None)
}

/// Like [`parse_dot`] with an explicit entry node id taking precedence.
pub fn parse_dot_with_entry(
    text: &str,
    kind: GraphKind,
    entry: Option<&str>,
) -> Result<ProgramGraph, GraphError> {
    let raw = Parser::new(text).graph()?;
    let mut graph_entry = None;
    let mut attrs = Vec::new();
    for (k, v) in raw.attrs {
        if k == "entry" {
            graph_entry = Some(v);
        } else {
            attrs.push((k, v));
        }
    }
    let nodes = raw
        .nodes
        .into_iter()
        .map(|(id, a)| decode_node(id, a))
        .collect::<Result<Vec<_>, _>>()?;
    let mut edges = Vec::with_capacity(raw.edges.len());
    for (from, from_port, to, to_port, eattrs) in raw.edges {
        let mut edge = GraphEdge::direct(from, to);
        edge.from_port = from_port;
        edge.to_port = to_port;
        for (k, v) in eattrs {
            if k == "indirect" {
                edge.indirect = parse_bool(&v).ok_or_else(|| GraphError::Parse {
                    line: 0,
                    msg: format!(
                        "edge {} -> {}: bad `indirect` value `{v}`",
                        edge.from, edge.to
                    ),
                })?;
            } else {
                edge.attrs.push((k, v));
            }
        }
        edges.push(edge);
    }
    let entry = match entry.map(str::to_owned).or(graph_entry) {
        Some(e) => e,
        None => match &kind {
            GraphKind::CallGraph => nodes
                .iter()
                .find(|n| n.name() == "main")
                .map(|n| n.id.clone())
                .unwrap_or_else(|| "main".to_owned()),
            GraphKind::ControlFlow(f) => nodes
                .first()
                .map(|n| n.id.clone())
                .ok_or_else(|| GraphError::MissingEntry(format!("entry block of `{f}`")))?,
        },
    };
    let mut g = ProgramGraph::new(kind, nodes, edges, entry)?;
    g.name = raw.name;
    g.attrs = attrs;
    Ok(g)
}

fn is_plain_id(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        Some(c) if c.is_ascii_digit() => s.chars().all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn id_text(s: &str) -> String {
    if is_plain_id(s) {
        s.to_owned()
    } else {
        quoted(s)
    }
}

fn join<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> String) -> String {
    items.into_iter().map(f).collect::<Vec<_>>().join("/")
}

fn node_attrs(n: &GraphNode) -> Vec<String> {
    let mut out: Vec<String> = n
        .attrs
        .iter()
        .map(|(k, v)| format!("{}={}", id_text(k), id_text(v)))
        .collect();
    if let Some(loc) = &n.location {
        out.push(format!("filename={}", quoted(&loc.file)));
        out.push(format!("startline={}", loc.start_line));
        out.push(format!("endline={}", loc.end_line));
        if let Some(c) = loc.start_column {
            out.push(format!("startcolumn={c}"));
        }
    }
    if let Some(l) = &n.label {
        out.push(format!("label={}", quoted(l)));
    }
    if !n.memberships.is_empty() {
        out.push(format!(
            "ts_kind={}",
            quoted(&join(n.memberships.values(), |m| m.as_str().to_owned()))
        ));
        out.push(format!(
            "ts_numbers={}",
            quoted(&join(n.memberships.keys(), |k| k.to_string()))
        ));
    }
    if !n.weights.is_empty() {
        out.push(format!(
            "w_val={}",
            quoted(&join(n.weights.values(), |w| format!("{w:?}")))
        ));
        out.push(format!(
            "w_numbers={}",
            quoted(&join(n.weights.keys(), |k| k.to_string()))
        ));
    }
    out
}

/// Writes the graph in the annotated DOT dialect. Output is deterministic:
/// opaque attributes keep their input order and recognized ones follow in a
/// fixed order.
pub fn dump_dot(graph: &ProgramGraph) -> String {
    let mut s = String::new();
    match &graph.name {
        Some(name) => writeln!(s, "digraph {} {{", id_text(name)).unwrap(),
        None => s.push_str("digraph {\n"),
    }
    for (k, v) in &graph.attrs {
        writeln!(s, "    {}={};", id_text(k), quoted(v)).unwrap();
    }
    writeln!(s, "    entry={};", quoted(graph.entry())).unwrap();
    s.push('\n');
    for n in graph.nodes() {
        let attrs = node_attrs(n);
        if attrs.is_empty() {
            writeln!(s, "    {};", id_text(&n.id)).unwrap();
        } else {
            writeln!(s, "    {} [{}];", id_text(&n.id), attrs.join(", ")).unwrap();
        }
    }
    for e in graph.edges() {
        let end = |id: &str, port: &Option<String>| match port {
            Some(p) => format!("{}:{}", id_text(id), id_text(p)),
            None => id_text(id),
        };
        let mut attrs: Vec<String> = e
            .attrs
            .iter()
            .map(|(k, v)| format!("{}={}", id_text(k), id_text(v)))
            .collect();
        if e.indirect {
            attrs.push("indirect=true".into());
        }
        write!(
            s,
            "    {} -> {}",
            end(&e.from, &e.from_port),
            end(&e.to, &e.to_port)
        )
        .unwrap();
        if !attrs.is_empty() {
            write!(s, " [{}]", attrs.join(", ")).unwrap();
        }
        s.push_str(";\n");
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const CALL_GRAPH: &str = r#"digraph "Call graph: example.ll" {
    label="Call graph: example.ll";

    Node0x10 [shape=record, filename="/home/user/example/main.c", startline=5,endline=10,label="{foo}"];
    Node0x20 [shape=record, filename="/home/user/example/main.c", startline=12,endline=23,label="{main}"];
    Node0x20 -> Node0x10;
}
"#;

    const ANNOTATED_NODE: &str = r#"Node0x30 [shape=record, filename="/home/user/example/main.cpp", startline=52, endline=77, startcolumn=9, label="{main}", ts_kind="point/member", ts_numbers="0/1", w_val="1.0/0.435", w_numbers="0/1"];"#;

    #[test]
    fn parses_listing_call_graph() {
        let g = parse_dot(CALL_GRAPH, GraphKind::CallGraph).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.entry(), "Node0x20");
        assert_eq!(g.name.as_deref(), Some("Call graph: example.ll"));
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0].from, "Node0x20");
        assert_eq!(g.edges()[0].to, "Node0x10");
        assert!(!g.edges()[0].indirect);
        let foo = g.node("Node0x10").unwrap();
        assert_eq!(foo.name(), "foo");
        let loc = foo.location.as_ref().unwrap();
        assert_eq!((loc.start_line, loc.end_line), (5, 10));
        assert_eq!(loc.file, "/home/user/example/main.c");
        assert_eq!(foo.attr("shape"), Some("record"));
    }

    #[test]
    fn decodes_multi_value_ets_attributes() {
        let text = format!("digraph G {{ entry=Node0x30; {ANNOTATED_NODE} }}");
        let g = parse_dot(&text, GraphKind::CallGraph).unwrap();
        let n = g.node("Node0x30").unwrap();
        assert_eq!(n.memberships[&0], Membership::TargetPoint);
        assert_eq!(n.memberships[&1], Membership::Intermediate);
        assert_eq!(n.weights[&0], 1.0);
        assert_eq!(n.weights[&1], 0.435);
        assert_eq!(n.location.as_ref().unwrap().start_column, Some(9));
    }

    #[test]
    fn annotated_node_dumps_byte_identically() {
        let text = format!("digraph G {{ entry=Node0x30; {ANNOTATED_NODE} }}");
        let g = parse_dot(&text, GraphKind::CallGraph).unwrap();
        let out = dump_dot(&g);
        assert!(out.contains(ANNOTATED_NODE), "{out}");
    }

    #[test]
    fn empty_digraph_has_no_entry() {
        let err = parse_dot("digraph G {}", GraphKind::CallGraph).unwrap_err();
        assert!(matches!(err, GraphError::MissingEntry(_)));
        let err = parse_dot("digraph G {}", GraphKind::ControlFlow("f".into())).unwrap_err();
        assert!(matches!(err, GraphError::MissingEntry(_)));
    }

    #[test]
    fn weight_arity_mismatch_is_rejected() {
        let text = r#"digraph { main [ts_kind="point/member", ts_numbers="0/1", w_val="1.0", w_numbers="0/1"]; }"#;
        let err = parse_dot(text, GraphKind::CallGraph).unwrap_err();
        assert!(matches!(err, GraphError::InvalidNode { .. }), "{err:?}");
        let text = r#"digraph { main [ts_kind="point", ts_numbers="0/1"]; }"#;
        assert!(parse_dot(text, GraphKind::CallGraph).is_err());
    }

    #[test]
    fn malformed_input_reports_line() {
        let text = "digraph G {\n  a -> b;\n  c [label=];\n}";
        match parse_dot(text, GraphKind::ControlFlow("f".into())).unwrap_err() {
            GraphError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "digraph G {\n  a -> b\n";
        assert!(matches!(
            parse_dot(text, GraphKind::ControlFlow("f".into())),
            Err(GraphError::Parse { .. })
        ));
    }

    #[test]
    fn bare_indirect_attribute_and_ports() {
        let text = r#"digraph {
            // leading comment
            main; foo;
            main -> foo [indirect];
            /* block
               comment */
            foo:s0 -> main [label="back"];
        }"#;
        let g = parse_dot(text, GraphKind::CallGraph).unwrap();
        assert!(g.edges()[0].indirect);
        assert_eq!(g.edges()[1].from_port.as_deref(), Some("s0"));
        assert_eq!(g.edges()[1].attrs, vec![("label".into(), "back".into())]);
        let again = parse_dot(&dump_dot(&g), GraphKind::CallGraph).unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn zero_edges_dump_has_only_nodes() {
        let g = parse_dot(
            "digraph { main; other [label=\"x\"]; }",
            GraphKind::CallGraph,
        )
        .unwrap();
        let out = dump_dot(&g);
        assert!(out.contains("    main;\n"));
        assert!(out.contains("    other [label=\"x\"];\n"));
        assert!(!out.contains("->"));
    }

    #[test]
    fn explicit_entry_overrides_default() {
        let g = parse_dot_with_entry(CALL_GRAPH, GraphKind::CallGraph, Some("Node0x10")).unwrap();
        assert_eq!(g.entry(), "Node0x10");
        let dumped = dump_dot(&g);
        assert_eq!(
            parse_dot(&dumped, GraphKind::CallGraph).unwrap().entry(),
            "Node0x10"
        );
    }

    #[test]
    fn rejects_unsupported_constructs() {
        for text in [
            "graph { a -- b; }",
            "digraph { subgraph cluster { a; } }",
            "digraph { node [shape=box]; a; }",
            "digraph { a [label=<b>x</b>]; }",
        ] {
            assert!(
                parse_dot(text, GraphKind::ControlFlow("f".into())).is_err(),
                "{text}"
            );
        }
    }
}
