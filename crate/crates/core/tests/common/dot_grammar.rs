//! Recursive-descent checker for the Graphviz DOT language as given in the
//! Graphviz language reference:
//!
//! ```text
//! graph     : [strict] (graph | digraph) [ID] '{' stmt_list '}'
//! stmt_list : [stmt [';'] stmt_list]
//! stmt      : node_stmt | edge_stmt | attr_stmt | ID '=' ID | subgraph
//! attr_stmt : (graph | node | edge) attr_list
//! attr_list : '[' [a_list] ']' [attr_list]
//! a_list    : ID '=' ID [(';' | ',')] [a_list]
//! edge_stmt : (node_id | subgraph) edgeRHS [attr_list]
//! edgeRHS   : edgeop (node_id | subgraph) [edgeRHS]
//! node_stmt : node_id [attr_list]
//! node_id   : ID [port]
//! port      : ':' ID [':' ID]
//! subgraph  : [subgraph [ID]] '{' stmt_list '}'
//! ```

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    Keyword(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Semi,
    Comma,
    Colon,
    Arrow,
    DashDash,
}

const KEYWORDS: [&str; 6] = ["strict", "graph", "digraph", "node", "edge", "subgraph"];

fn lex(src: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line_start = true;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' && line_start {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        line_start = false;
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i + 1 < chars.len() && !(chars[i] == '*' && chars[i + 1] == '/') {
                i += 1;
            }
            if i + 1 >= chars.len() {
                return Err("unterminated comment".into());
            }
            i += 2;
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
        if let Some(t) = simple {
            toks.push(t);
            i += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            toks.push(Tok::Arrow);
            i += 2;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            toks.push(Tok::DashDash);
            i += 2;
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        i += 2;
                    }
                    Some('\\') if chars.get(i + 1) == Some(&'\n') => i += 2,
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            toks.push(Tok::Id(s));
            continue;
        }
        if c == '<' {
            let mut depth = 0;
            let start = i;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated HTML string".into()),
                    Some('<') => depth += 1,
                    Some('>') => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            toks.push(Tok::Id(chars[start + 1..i].iter().collect()));
            i += 1;
            continue;
        }
        if c == '-' || c == '.' || c.is_ascii_digit() {
            let start = i;
            if c == '-' {
                i += 1;
            }
            let mut digits = 0;
            let mut dot = false;
            while let Some(&d) = chars.get(i) {
                if d.is_ascii_digit() {
                    digits += 1;
                } else if d == '.' && !dot {
                    dot = true;
                } else {
                    break;
                }
                i += 1;
            }
            if digits == 0 {
                return Err(format!("malformed numeral at offset {start}"));
            }
            if chars.get(i).is_some_and(|d| d.is_alphabetic() || *d == '_') {
                return Err(format!(
                    "identifier may not start with a digit at offset {start}"
                ));
            }
            toks.push(Tok::Id(chars[start..i].iter().collect()));
            continue;
        }
        if c.is_alphabetic() || c == '_' || !c.is_ascii() {
            let start = i;
            while chars
                .get(i)
                .is_some_and(|d| d.is_alphanumeric() || *d == '_' || !d.is_ascii())
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if KEYWORDS.contains(&word.to_ascii_lowercase().as_str()) {
                toks.push(Tok::Keyword(word.to_ascii_lowercase()));
            } else {
                toks.push(Tok::Id(word));
            }
            continue;
        }
        return Err(format!("unexpected character {c:?}"));
    }
    Ok(toks)
}

/// What a valid document declared.
#[derive(Debug, Default)]
pub struct DotGraph {
    pub directed: bool,
    pub nodes: BTreeMap<String, BTreeMap<String, String>>,
    pub edges: Vec<(String, String, BTreeMap<String, String>)>,
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    graph: DotGraph,
}

type Attrs = BTreeMap<String, String>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<(), String> {
        match self.next() {
            Some(ref got) if *got == t => Ok(()),
            got => Err(format!(
                "expected {t:?}, found {got:?} at token {}",
                self.pos - 1
            )),
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.next() {
            Some(Tok::Id(s)) => Ok(s),
            got => Err(format!(
                "expected ID, found {got:?} at token {}",
                self.pos - 1
            )),
        }
    }

    fn graph(&mut self) -> Result<(), String> {
        if self.peek() == Some(&Tok::Keyword("strict".into())) {
            self.pos += 1;
        }
        match self.next() {
            Some(Tok::Keyword(k)) if k == "digraph" => self.graph.directed = true,
            Some(Tok::Keyword(k)) if k == "graph" => self.graph.directed = false,
            got => return Err(format!("expected graph or digraph, found {got:?}")),
        }
        if matches!(self.peek(), Some(Tok::Id(_))) {
            self.pos += 1;
        }
        self.expect(Tok::LBrace)?;
        self.stmt_list()?;
        self.expect(Tok::RBrace)?;
        if self.pos != self.toks.len() {
            return Err("trailing tokens after graph".into());
        }
        Ok(())
    }

    fn stmt_list(&mut self) -> Result<(), String> {
        while !matches!(self.peek(), Some(Tok::RBrace) | None) {
            self.stmt()?;
            if self.peek() == Some(&Tok::Semi) {
                self.pos += 1;
            }
        }
        Ok(())
    }

    fn attr_list(&mut self) -> Result<Attrs, String> {
        let mut attrs = Attrs::new();
        while self.peek() == Some(&Tok::LBracket) {
            self.pos += 1;
            while self.peek() != Some(&Tok::RBracket) {
                let k = self.id()?;
                self.expect(Tok::Eq)?;
                let v = self.id()?;
                attrs.insert(k, v);
                if matches!(self.peek(), Some(Tok::Semi) | Some(Tok::Comma)) {
                    self.pos += 1;
                }
            }
            self.expect(Tok::RBracket)?;
        }
        Ok(attrs)
    }

    fn node_id(&mut self) -> Result<String, String> {
        let id = self.id()?;
        if self.peek() == Some(&Tok::Colon) {
            self.pos += 1;
            self.id()?;
            if self.peek() == Some(&Tok::Colon) {
                self.pos += 1;
                self.id()?;
            }
        }
        Ok(id)
    }

    /// A node id or subgraph as an edge endpoint; subgraphs yield no name.
    fn endpoint(&mut self) -> Result<Option<String>, String> {
        match self.peek() {
            Some(Tok::LBrace) | Some(Tok::Keyword(_)) => {
                self.subgraph()?;
                Ok(None)
            }
            _ => self.node_id().map(Some),
        }
    }

    fn subgraph(&mut self) -> Result<(), String> {
        if self.peek() == Some(&Tok::Keyword("subgraph".into())) {
            self.pos += 1;
            if matches!(self.peek(), Some(Tok::Id(_))) {
                self.pos += 1;
            }
        }
        self.expect(Tok::LBrace)?;
        self.stmt_list()?;
        self.expect(Tok::RBrace)
    }

    fn stmt(&mut self) -> Result<(), String> {
        match self.peek().cloned() {
            Some(Tok::Keyword(k)) if k == "graph" || k == "node" || k == "edge" => {
                self.pos += 1;
                if self.peek() != Some(&Tok::LBracket) {
                    return Err(format!("{k} statement needs an attribute list"));
                }
                self.attr_list()?;
                return Ok(());
            }
            Some(Tok::Id(_)) if self.toks.get(self.pos + 1) == Some(&Tok::Eq) => {
                self.id()?;
                self.pos += 1;
                self.id()?;
                return Ok(());
            }
            _ => {}
        }
        let first = self.endpoint()?;
        let op = if self.graph.directed {
            Tok::Arrow
        } else {
            Tok::DashDash
        };
        let mut chain = vec![first];
        while matches!(self.peek(), Some(Tok::Arrow) | Some(Tok::DashDash)) {
            if self.next() != Some(op.clone()) {
                return Err("edge operator does not match graph kind".into());
            }
            chain.push(self.endpoint()?);
        }
        let attrs = self.attr_list()?;
        if chain.len() == 1 {
            if let Some(Some(name)) = chain.pop() {
                self.graph.nodes.entry(name).or_default().extend(attrs);
            }
        } else {
            for w in chain.windows(2) {
                if let (Some(a), Some(b)) = (&w[0], &w[1]) {
                    self.graph.edges.push((a.clone(), b.clone(), attrs.clone()));
                }
            }
        }
        Ok(())
    }
}

pub fn parse(src: &str) -> Result<DotGraph, String> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        graph: DotGraph::default(),
    };
    p.graph()?;
    Ok(p.graph)
}
