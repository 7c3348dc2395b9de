//! Parser and writer for the subset of the DOT language used by graph map
//! inputs: `graph`/`digraph` bodies with node, edge, attribute and subgraph
//! statements. Attributes other than `pos` and `label` are kept verbatim.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use super::{Graph, Node};
use crate::geometry::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("graph has no nodes")]
    Empty,
    #[error("node {node:?}: malformed pos attribute {value:?}")]
    BadPosition { node: String, value: String },
}

#[derive(Clone, Debug, PartialEq)]
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
    EdgeOp,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, column, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut at_line_start = true;
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
                at_line_start = true;
            } else {
                col += 1;
                if !chars[i].is_whitespace() {
                    at_line_start = false;
                }
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        // preprocessor-style lines and comments
        if c == '#' && at_line_start {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(syntax(l0, c0, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let simple = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '=' => Some(Tok::Eq),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            _ => None,
        };
        if let Some(tok) = simple {
            bump!();
            out.push(Spanned { tok, line: l0, column: c0 });
            continue;
        }
        if c == '-' && matches!(chars.get(i + 1), Some('-') | Some('>')) {
            bump!();
            bump!();
            out.push(Spanned { tok: Tok::EdgeOp, line: l0, column: c0 });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() {
                    return Err(syntax(l0, c0, "unterminated string"));
                }
                let ch = chars[i];
                if ch == '"' {
                    bump!();
                    break;
                }
                if ch == '\\' && i + 1 < chars.len() {
                    let nx = chars[i + 1];
                    bump!();
                    bump!();
                    match nx {
                        '"' => s.push('"'),
                        '\n' => {}
                        other => {
                            s.push('\\');
                            s.push(other);
                        }
                    }
                    continue;
                }
                s.push(ch);
                bump!();
            }
            // "a" + "b" concatenation
            out.push(Spanned { tok: Tok::Id(s), line: l0, column: c0 });
            continue;
        }
        if c == '<' {
            let mut depth = 0usize;
            let mut s = String::new();
            loop {
                if i >= chars.len() {
                    return Err(syntax(l0, c0, "unterminated HTML string"));
                }
                let ch = chars[i];
                bump!();
                match ch {
                    '<' => {
                        depth += 1;
                        if depth > 1 {
                            s.push(ch);
                        }
                    }
                    '>' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                        s.push(ch);
                    }
                    _ => s.push(ch),
                }
            }
            out.push(Spanned { tok: Tok::Id(s), line: l0, column: c0 });
            continue;
        }
        if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' || !c.is_ascii() {
            let mut s = String::new();
            while i < chars.len() {
                let ch = chars[i];
                let ok = ch.is_alphanumeric() || ch == '_' || ch == '.' || !ch.is_ascii();
                let neg = ch == '-' && s.is_empty();
                if !(ok || neg) {
                    break;
                }
                s.push(ch);
                bump!();
            }
            out.push(Spanned { tok: Tok::Id(s), line: l0, column: c0 });
            continue;
        }
        return Err(syntax(l0, c0, format!("unexpected character {c:?}")));
    }
    // merge `"a" + "b"`
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
    graph: Graph,
    index: HashMap<String, usize>,
    edge_set: HashMap<(usize, usize), ()>,
}

enum Endpoint {
    Node(usize),
    Group(Vec<usize>),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.column)).unwrap_or(self.eof)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self.here();
        syntax(l, c, msg)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn id(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Id(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected identifier")),
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Id(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.graph.nodes.len();
        self.graph.nodes.push(Node {
            id: name.to_string(),
            label: name.to_string(),
            pos: None,
            attrs: BTreeMap::new(),
        });
        self.index.insert(name.to_string(), i);
        i
    }

    fn attr_list(&mut self) -> Result<Vec<(String, String)>, ParseError> {
        let mut attrs = Vec::new();
        while self.eat(&Tok::LBracket) {
            loop {
                if self.eat(&Tok::RBracket) {
                    break;
                }
                let k = self.id()?;
                let v = if self.eat(&Tok::Eq) { self.id()? } else { "true".to_string() };
                attrs.push((k, v));
                if !self.eat(&Tok::Comma) {
                    self.eat(&Tok::Semi);
                }
            }
        }
        Ok(attrs)
    }

    fn apply_node_attrs(&mut self, n: usize, attrs: &[(String, String)]) -> Result<(), ParseError> {
        for (k, v) in attrs {
            match k.as_str() {
                "pos" => {
                    let node = &self.graph.nodes[n];
                    let p = parse_pos(v)
                        .ok_or_else(|| ParseError::BadPosition { node: node.id.clone(), value: v.clone() })?;
                    self.graph.nodes[n].pos = Some(p);
                }
                "label" => {
                    let node = &mut self.graph.nodes[n];
                    node.label = if v == "\\N" { node.id.clone() } else { v.clone() };
                }
                _ => {
                    self.graph.nodes[n].attrs.insert(k.clone(), v.clone());
                }
            }
        }
        Ok(())
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        if a == b {
            self.graph.self_loops_dropped += 1;
            return;
        }
        let key = (a.min(b), a.max(b));
        if self.edge_set.insert(key, ()).is_some() {
            self.graph.duplicate_edges_collapsed += 1;
            return;
        }
        self.graph.edges.push(key);
    }

    fn endpoint(&mut self) -> Result<Endpoint, ParseError> {
        if self.keyword("subgraph") || self.peek() == Some(&Tok::LBrace) {
            let before = self.graph.nodes.len();
            let mut members = self.subgraph()?;
            members.extend(before..self.graph.nodes.len());
            members.sort_unstable();
            members.dedup();
            return Ok(Endpoint::Group(members));
        }
        let name = self.id()?;
        // port suffix `a:port:compass` is ignored
        while self.eat(&Tok::Colon) {
            self.id()?;
        }
        Ok(Endpoint::Node(self.node(&name)))
    }

    /// Parses `[subgraph [id]] { stmts }`, returning every node mentioned inside.
    fn subgraph(&mut self) -> Result<Vec<usize>, ParseError> {
        if self.keyword("subgraph") {
            self.pos += 1;
            if matches!(self.peek(), Some(Tok::Id(_))) {
                self.pos += 1;
            }
        }
        self.expect(Tok::LBrace, "'{'")?;
        let mut members = Vec::new();
        self.stmt_list(&mut members)?;
        self.expect(Tok::RBrace, "'}'")?;
        Ok(members)
    }

    fn stmt_list(&mut self, members: &mut Vec<usize>) -> Result<(), ParseError> {
        while let Some(tok) = self.peek() {
            if *tok == Tok::RBrace {
                break;
            }
            if self.eat(&Tok::Semi) {
                continue;
            }
            self.stmt(members)?;
        }
        Ok(())
    }

    fn stmt(&mut self, members: &mut Vec<usize>) -> Result<(), ParseError> {
        if self.keyword("graph") || self.keyword("node") || self.keyword("edge") {
            let kind = self.id()?.to_ascii_lowercase();
            let attrs = self.attr_list()?;
            if kind == "graph" {
                self.graph.attrs.extend(attrs);
            }
            return Ok(());
        }
        let first = self.endpoint()?;
        // graph attribute `k = v`
        if let Endpoint::Node(n) = first {
            if self.peek() == Some(&Tok::Eq) {
                self.pos += 1;
                let value = self.id()?;
                // the lhs was not a node after all
                let node = self.graph.nodes.pop().expect("just inserted");
                debug_assert_eq!(n, self.graph.nodes.len());
                self.index.remove(&node.id);
                self.graph.attrs.push((node.id, value));
                return Ok(());
            }
        }
        let mut chain = vec![first];
        while self.eat(&Tok::EdgeOp) {
            chain.push(self.endpoint()?);
        }
        let attrs = self.attr_list()?;
        let nodes_of = |e: &Endpoint| match e {
            Endpoint::Node(n) => vec![*n],
            Endpoint::Group(g) => g.clone(),
        };
        if chain.len() == 1 {
            let ns = nodes_of(&chain[0]);
            if let Endpoint::Node(n) = chain[0] {
                self.apply_node_attrs(n, &attrs)?;
            }
            members.extend(ns);
        } else {
            for w in chain.windows(2) {
                for a in nodes_of(&w[0]) {
                    for b in nodes_of(&w[1]) {
                        self.add_edge(a, b);
                    }
                }
            }
            for e in &chain {
                members.extend(nodes_of(e));
            }
        }
        Ok(())
    }
}

/// Parses a Graphviz `pos` value `"x,y"` (an optional trailing `!` or third
/// coordinate is ignored).
pub fn parse_pos(value: &str) -> Option<Point> {
    let v = value.trim().trim_end_matches('!');
    let mut it = v.split(',').map(|s| s.trim().parse::<f64>());
    let x = it.next()?.ok()?;
    let y = it.next()?.ok()?;
    (x.is_finite() && y.is_finite()).then_some(Point::new(x, y))
}

/// Parse DOT text into an unordered [`Graph`].
pub fn parse_dot(text: &str) -> Result<Graph, ParseError> {
    let toks = lex(text)?;
    let eof = toks.last().map(|t| (t.line, t.column + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, eof, graph: Graph::default(), index: HashMap::new(), edge_set: HashMap::new() };
    if p.keyword("strict") {
        p.pos += 1;
    }
    if p.keyword("digraph") {
        p.graph.directed = true;
    } else if !p.keyword("graph") {
        return Err(p.err("expected 'graph' or 'digraph'"));
    }
    p.pos += 1;
    if let Some(Tok::Id(name)) = p.peek() {
        p.graph.name = name.clone();
        p.pos += 1;
    }
    p.expect(Tok::LBrace, "'{'")?;
    let mut members = Vec::new();
    p.stmt_list(&mut members)?;
    p.expect(Tok::RBrace, "'}'")?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected input after graph body"));
    }
    if p.graph.nodes.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(p.graph)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        if ch == '"' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('"');
    out
}

/// Serialize a graph back to DOT. Positions are written with full precision
/// so that parsing the output reproduces the graph exactly.
pub fn write_dot(graph: &Graph) -> String {
    let mut s = String::new();
    let kw = if graph.directed { "digraph" } else { "graph" };
    let op = if graph.directed { "->" } else { "--" };
    let _ = writeln!(s, "{kw} {} {{", quote(&graph.name));
    for (k, v) in &graph.attrs {
        let _ = writeln!(s, "  {}={};", quote(k), quote(v));
    }
    for n in &graph.nodes {
        let mut attrs = vec![format!("label={}", quote(&n.label))];
        if let Some(p) = n.pos {
            attrs.push(format!("pos=\"{:?},{:?}\"", p.x, p.y));
        }
        for (k, v) in &n.attrs {
            attrs.push(format!("{}={}", quote(k), quote(v)));
        }
        let _ = writeln!(s, "  {} [{}];", quote(&n.id), attrs.join(", "));
    }
    for &(a, b) in &graph.edges {
        let _ = writeln!(s, "  {} {op} {};", quote(&graph.nodes[a].id), quote(&graph.nodes[b].id));
    }
    s.push_str("}\n");
    s
}
