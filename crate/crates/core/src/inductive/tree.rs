use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Block-structured process model.
///
/// Operators carry at least two children. For `Loop` the first child is the
/// body and the remaining children are alternative redo parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProcessTree {
    Activity(String),
    Silent,
    Sequence(Vec<ProcessTree>),
    Xor(Vec<ProcessTree>),
    Concurrent(Vec<ProcessTree>),
    Loop(Vec<ProcessTree>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Sequence,
    Xor,
    Concurrent,
    Loop,
}

impl Operator {
    pub fn keyword(self) -> &'static str {
        match self {
            Operator::Sequence => "Seq",
            Operator::Xor => "Xor",
            Operator::Concurrent => "And",
            Operator::Loop => "Loop",
        }
    }
}

impl ProcessTree {
    pub fn activity(label: impl Into<String>) -> Self {
        ProcessTree::Activity(label.into())
    }

    /// Build an operator node. Nested nodes of the same associative operator
    /// (sequence, choice, concurrency) are flattened; a single child is
    /// returned as is.
    pub fn operator(op: Operator, children: Vec<ProcessTree>) -> Self {
        if children.len() == 1 && op != Operator::Loop {
            return children.into_iter().next().unwrap();
        }
        let mut flat = Vec::with_capacity(children.len());
        for child in children {
            match (op, child) {
                (Operator::Sequence, ProcessTree::Sequence(inner))
                | (Operator::Xor, ProcessTree::Xor(inner))
                | (Operator::Concurrent, ProcessTree::Concurrent(inner)) => flat.extend(inner),
                (_, c) => flat.push(c),
            }
        }
        match op {
            Operator::Sequence => ProcessTree::Sequence(flat),
            Operator::Xor => ProcessTree::Xor(flat),
            Operator::Concurrent => ProcessTree::Concurrent(flat),
            Operator::Loop => ProcessTree::Loop(flat),
        }
    }

    pub fn op(&self) -> Option<Operator> {
        match self {
            ProcessTree::Sequence(_) => Some(Operator::Sequence),
            ProcessTree::Xor(_) => Some(Operator::Xor),
            ProcessTree::Concurrent(_) => Some(Operator::Concurrent),
            ProcessTree::Loop(_) => Some(Operator::Loop),
            _ => None,
        }
    }

    pub fn children(&self) -> &[ProcessTree] {
        match self {
            ProcessTree::Sequence(c)
            | ProcessTree::Xor(c)
            | ProcessTree::Concurrent(c)
            | ProcessTree::Loop(c) => c,
            _ => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.op().is_none()
    }

    /// Labels of all activity leaves.
    pub fn activities(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_activities(&mut out);
        out
    }

    fn collect_activities(&self, out: &mut BTreeSet<String>) {
        match self {
            ProcessTree::Activity(a) => {
                out.insert(a.clone());
            }
            ProcessTree::Silent => {}
            _ => self.children().iter().for_each(|c| c.collect_activities(out)),
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Structural validity: operators have at least two children.
    pub fn is_valid(&self) -> bool {
        match self {
            ProcessTree::Activity(a) => !a.is_empty(),
            ProcessTree::Silent => true,
            _ => self.children().len() >= 2 && self.children().iter().all(|c| c.is_valid()),
        }
    }

    /// Canonical form: children of choice and concurrency nodes are sorted
    /// by their serialized form.
    pub fn canonical(&self) -> ProcessTree {
        match self {
            ProcessTree::Activity(_) | ProcessTree::Silent => self.clone(),
            ProcessTree::Sequence(c) => ProcessTree::Sequence(c.iter().map(|x| x.canonical()).collect()),
            ProcessTree::Loop(c) => ProcessTree::Loop(c.iter().map(|x| x.canonical()).collect()),
            ProcessTree::Xor(c) => ProcessTree::Xor(sorted_canonical(c)),
            ProcessTree::Concurrent(c) => ProcessTree::Concurrent(sorted_canonical(c)),
        }
    }
}

fn sorted_canonical(children: &[ProcessTree]) -> Vec<ProcessTree> {
    let mut keyed: Vec<(String, ProcessTree)> = children
        .iter()
        .map(|c| {
            let c = c.canonical();
            (c.to_string(), c)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.into_iter().map(|(_, c)| c).collect()
}

fn needs_quotes(label: &str) -> bool {
    label.is_empty()
        || label == "tau"
        || label != label.trim()
        || label.chars().any(|c| matches!(c, '(' | ')' | ',' | '\'' | '\\'))
        || ["Seq", "Xor", "And", "Loop"].contains(&label)
}

impl fmt::Display for ProcessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessTree::Activity(a) if needs_quotes(a) => {
                f.write_str("'")?;
                for ch in a.chars() {
                    if ch == '\'' || ch == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{ch}")?;
                }
                f.write_str("'")
            }
            ProcessTree::Activity(a) => f.write_str(a),
            ProcessTree::Silent => f.write_str("tau"),
            _ => {
                write!(f, "{}(", self.op().unwrap().keyword())?;
                for (i, c) in self.children().iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("process tree syntax error at offset {offset}: {message}")]
pub struct TreeParseError {
    pub offset: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, TreeParseError> {
        Err(TreeParseError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn node(&mut self) -> Result<ProcessTree, TreeParseError> {
        self.skip_ws();
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some('\'') => {
                self.pos += 1;
                let mut label = String::new();
                loop {
                    match self.peek() {
                        None => return self.err("unterminated quoted label"),
                        Some('\\') => {
                            self.pos += 1;
                            match self.peek() {
                                Some(c) => {
                                    label.push(c);
                                    self.pos += c.len_utf8();
                                }
                                None => return self.err("dangling escape"),
                            }
                        }
                        Some('\'') => {
                            self.pos += 1;
                            break;
                        }
                        Some(c) => {
                            label.push(c);
                            self.pos += c.len_utf8();
                        }
                    }
                }
                Ok(ProcessTree::Activity(label))
            }
            Some(_) => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if matches!(c, '(' | ')' | ',') {
                        break;
                    }
                    self.pos += c.len_utf8();
                }
                let word = self.src[start..self.pos].trim();
                if word.is_empty() {
                    return self.err("expected a label or operator");
                }
                if self.peek() == Some('(') {
                    let op = match word {
                        "Seq" => Operator::Sequence,
                        "Xor" => Operator::Xor,
                        "And" => Operator::Concurrent,
                        "Loop" => Operator::Loop,
                        other => return self.err(format!("unknown operator '{other}'")),
                    };
                    self.pos += 1;
                    let mut children = vec![self.node()?];
                    loop {
                        self.skip_ws();
                        match self.peek() {
                            Some(',') => {
                                self.pos += 1;
                                children.push(self.node()?);
                            }
                            Some(')') => {
                                self.pos += 1;
                                break;
                            }
                            _ => return self.err("expected ',' or ')'"),
                        }
                    }
                    if children.len() < 2 {
                        return self.err("operators need at least two children");
                    }
                    Ok(match op {
                        Operator::Sequence => ProcessTree::Sequence(children),
                        Operator::Xor => ProcessTree::Xor(children),
                        Operator::Concurrent => ProcessTree::Concurrent(children),
                        Operator::Loop => ProcessTree::Loop(children),
                    })
                } else if word == "tau" {
                    Ok(ProcessTree::Silent)
                } else {
                    Ok(ProcessTree::Activity(word.to_string()))
                }
            }
        }
    }
}

impl FromStr for ProcessTree {
    type Err = TreeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: s, pos: 0 };
        let tree = p.node()?;
        p.skip_ws();
        if p.pos != s.len() {
            return p.err("trailing input");
        }
        Ok(tree)
    }
}
