//! Decision rules: `antecedent => consequent` over case attributes and
//! pathways.
//!
//! ```text
//! SIRSCriteria2OrMore = true and CRP between 109 and 185 => contains "IV Antibiotics"
//! not Hypotensie => "Admission NC" before "Admission IC"
//! ```

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::AnalyticsError;
use crate::eventlog::{AttributeValue, EventLog, Trace};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Or(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Compare { attribute: String, op: CmpOp, value: Value },
    /// Inclusive interval.
    Between { attribute: String, low: f64, high: f64 },
    /// Bare attribute: true iff the attribute is boolean `true`.
    Truthy(String),
    Const(bool),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Consequent {
    Contains(String),
    /// Both occur and the first `0` precedes the first `1`.
    Before(String, String),
    Not(Box<Consequent>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    pub source: String,
    pub antecedent: Expr,
    pub consequent: Consequent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleReport {
    pub rule: String,
    pub support: usize,
    pub satisfied: usize,
    /// `None` when no case satisfies the antecedent.
    pub confidence: Option<f64>,
    pub counterexamples: Vec<String>,
}

fn compare(v: &AttributeValue, op: CmpOp, rhs: &Value) -> bool {
    match rhs {
        Value::Number(n) => v
            .as_f64()
            .and_then(|x| x.partial_cmp(n))
            .map(|o| op.holds(o))
            .unwrap_or(false),
        Value::Bool(b) => match (v.as_bool(), op) {
            (Some(x), CmpOp::Eq) => x == *b,
            (Some(x), CmpOp::Ne) => x != *b,
            _ => false,
        },
        Value::Text(s) => {
            let lhs = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
            op.holds(lhs.as_str().cmp(s.as_str()))
        }
    }
}

impl Expr {
    pub fn eval(&self, trace: &Trace) -> bool {
        match self {
            Expr::Or(a, b) => a.eval(trace) || b.eval(trace),
            Expr::And(a, b) => a.eval(trace) && b.eval(trace),
            Expr::Not(a) => !a.eval(trace),
            Expr::Compare { attribute, op, value } => trace
                .case_attribute(attribute)
                .map(|v| compare(v, *op, value))
                .unwrap_or(false),
            Expr::Between { attribute, low, high } => trace
                .case_attribute(attribute)
                .and_then(AttributeValue::as_f64)
                .map(|x| *low <= x && x <= *high)
                .unwrap_or(false),
            Expr::Truthy(attribute) => trace
                .case_attribute(attribute)
                .and_then(AttributeValue::as_bool)
                .unwrap_or(false),
            Expr::Const(b) => *b,
        }
    }

    pub fn attributes(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Or(a, b) | Expr::And(a, b) => {
                a.collect(out);
                b.collect(out);
            }
            Expr::Not(a) => a.collect(out),
            Expr::Compare { attribute, .. } | Expr::Between { attribute, .. } | Expr::Truthy(attribute) => {
                out.insert(attribute);
            }
            Expr::Const(_) => {}
        }
    }
}

impl Consequent {
    pub fn eval(&self, trace: &Trace) -> bool {
        match self {
            Consequent::Contains(a) => trace.contains_activity(a),
            Consequent::Before(x, y) => {
                let pos = |l: &str| trace.activities().position(|a| a == l);
                matches!((pos(x), pos(y)), (Some(i), Some(j)) if i < j)
            }
            Consequent::Not(c) => !c.eval(trace),
        }
    }
}

/// Support, confidence and up to `max_counterexamples` violating case ids.
pub fn evaluate_rule(log: &EventLog, rule: &DecisionRule, max_counterexamples: usize) -> Result<RuleReport, AnalyticsError> {
    let schema = log.schema();
    if let Some(a) = rule.antecedent.attributes().into_iter().find(|a| !schema.contains_key(*a)) {
        return Err(AnalyticsError::UnknownAttribute(a.to_string()));
    }
    let mut report = RuleReport {
        rule: rule.source.clone(),
        support: 0,
        satisfied: 0,
        confidence: None,
        counterexamples: Vec::new(),
    };
    for t in log.traces() {
        if !rule.antecedent.eval(t) {
            continue;
        }
        report.support += 1;
        if rule.consequent.eval(t) {
            report.satisfied += 1;
        } else if report.counterexamples.len() < max_counterexamples {
            report.counterexamples.push(t.case_id.clone());
        }
    }
    if report.support > 0 {
        report.confidence = Some(report.satisfied as f64 / report.support as f64);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Arrow,
    Op(CmpOp),
    Word(String),
    Ident(String),
    Str(String),
    Num(f64),
}

fn syntax(offset: usize, message: impl Into<String>) -> AnalyticsError {
    AnalyticsError::RuleSyntax {
        offset,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, AnalyticsError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        let next = chars.get(i + 1).map(|x| x.1);
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let two: Option<Tok> = match (c, next) {
            ('=', Some('>')) => Some(Tok::Arrow),
            ('=', Some('=')) => Some(Tok::Op(CmpOp::Eq)),
            ('!', Some('=')) => Some(Tok::Op(CmpOp::Ne)),
            ('<', Some('=')) => Some(Tok::Op(CmpOp::Le)),
            ('>', Some('=')) => Some(Tok::Op(CmpOp::Ge)),
            _ => None,
        };
        if let Some(t) = two {
            out.push((off, t));
            i += 2;
            continue;
        }
        let one = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '=' => Some(Tok::Op(CmpOp::Eq)),
            '<' => Some(Tok::Op(CmpOp::Lt)),
            '>' => Some(Tok::Op(CmpOp::Gt)),
            _ => None,
        };
        if let Some(t) = one {
            out.push((off, t));
            i += 1;
            continue;
        }
        if c == '"' || c == '`' {
            let quote = c;
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(off, "unterminated quote")),
                    Some(&(_, '\\')) => {
                        let Some(&(_, e)) = chars.get(i + 1) else {
                            return Err(syntax(off, "dangling escape"));
                        };
                        s.push(e);
                        i += 2;
                    }
                    Some(&(_, ch)) if ch == quote => {
                        i += 1;
                        break;
                    }
                    Some(&(_, ch)) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push((off, if quote == '"' { Tok::Str(s) } else { Tok::Ident(s) }));
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && next.is_some_and(|n| n.is_ascii_digit() || n == '.')) || c == '.' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || matches!(chars[i].1, '.' | 'e' | 'E')) {
                i += 1;
            }
            let end = chars.get(i).map(|x| x.0).unwrap_or(src.len());
            let text = &src[chars[start].0..end];
            let n = text.parse().map_err(|_| syntax(off, format!("invalid number '{text}'")))?;
            out.push((off, Tok::Num(n)));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || matches!(chars[i].1, '_' | ':' | '.')) {
                i += 1;
            }
            let end = chars.get(i).map(|x| x.0).unwrap_or(src.len());
            out.push((off, Tok::Word(src[chars[start].0..end].to_string())));
            continue;
        }
        return Err(syntax(off, format!("unexpected character '{c}'")));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|x| &x.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|x| x.0).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|x| x.1.clone());
        self.pos += 1;
        t
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<Expr, AnalyticsError> {
        let mut e = self.and()?;
        while self.keyword("or") {
            e = Expr::Or(Box::new(e), Box::new(self.and()?));
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<Expr, AnalyticsError> {
        let mut e = self.not()?;
        while self.keyword("and") {
            e = Expr::And(Box::new(e), Box::new(self.not()?));
        }
        Ok(e)
    }

    fn not(&mut self) -> Result<Expr, AnalyticsError> {
        if self.keyword("not") {
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.atom()
    }

    fn number(&mut self) -> Result<f64, AnalyticsError> {
        let off = self.offset();
        match self.next() {
            Some(Tok::Num(n)) => Ok(n),
            _ => Err(syntax(off, "expected a number")),
        }
    }

    fn value(&mut self) -> Result<Value, AnalyticsError> {
        let off = self.offset();
        match self.next() {
            Some(Tok::Num(n)) => Ok(Value::Number(n)),
            Some(Tok::Str(s)) => Ok(Value::Text(s)),
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("true") => Ok(Value::Bool(true)),
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("false") => Ok(Value::Bool(false)),
            _ => Err(syntax(off, "expected a value")),
        }
    }

    fn atom(&mut self) -> Result<Expr, AnalyticsError> {
        let off = self.offset();
        let attribute = match self.next() {
            Some(Tok::LParen) => {
                let e = self.or()?;
                let off = self.offset();
                return match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err(syntax(off, "expected ')'")),
                };
            }
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("true") => return Ok(Expr::Const(true)),
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("false") => return Ok(Expr::Const(false)),
            Some(Tok::Word(w)) | Some(Tok::Ident(w)) => w,
            _ => return Err(syntax(off, "expected an attribute")),
        };
        if let Some(Tok::Op(op)) = self.peek().cloned() {
            self.pos += 1;
            let value = self.value()?;
            return Ok(Expr::Compare { attribute, op, value });
        }
        if self.keyword("between") {
            let low = self.number()?;
            if !self.keyword("and") {
                return Err(syntax(self.offset(), "expected 'and' in interval"));
            }
            let high = self.number()?;
            return Ok(Expr::Between { attribute, low, high });
        }
        Ok(Expr::Truthy(attribute))
    }

    fn label(&mut self) -> Result<String, AnalyticsError> {
        let off = self.offset();
        match self.next() {
            Some(Tok::Str(s)) => Ok(s),
            _ => Err(syntax(off, "expected a quoted activity")),
        }
    }

    fn consequent(&mut self) -> Result<Consequent, AnalyticsError> {
        if self.keyword("not") {
            return Ok(Consequent::Not(Box::new(self.consequent()?)));
        }
        if self.keyword("contains") {
            return Ok(Consequent::Contains(self.label()?));
        }
        let x = self.label()?;
        if !self.keyword("before") {
            return Err(syntax(self.offset(), "expected 'before'"));
        }
        Ok(Consequent::Before(x, self.label()?))
    }
}

impl FromStr for DecisionRule {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let toks = tokenize(s)?;
        let mut p = Parser {
            toks,
            pos: 0,
            end: s.len(),
        };
        let antecedent = p.or()?;
        let off = p.offset();
        if p.next() != Some(Tok::Arrow) {
            return Err(syntax(off, "expected '=>'"));
        }
        let consequent = p.consequent()?;
        if p.pos < p.toks.len() {
            return Err(syntax(p.offset(), "trailing input"));
        }
        Ok(DecisionRule {
            source: s.trim().to_string(),
            antecedent,
            consequent,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::Event;
    use chrono::{TimeZone, Utc};

    fn case(id: &str, acts: &[&str], attrs: &[(&str, AttributeValue)]) -> Trace {
        let t0 = Utc.with_ymd_and_hms(2014, 1, 1, 0, 0, 0).unwrap();
        let mut events: Vec<Event> = acts
            .iter()
            .enumerate()
            .map(|(i, a)| Event::new(*a, t0 + chrono::Duration::minutes(i as i64)))
            .collect();
        for (k, v) in attrs {
            events[0].attributes.insert(k.to_string(), v.clone());
        }
        Trace::new(id, events)
    }

    fn log() -> EventLog {
        use AttributeValue::*;
        EventLog::new(vec![
            case("1", &["R", "AB"], &[("SIRS", Boolean(true)), ("CRP", Real(120.0))]),
            case("2", &["R"], &[("SIRS", Boolean(true)), ("CRP", Real(300.0))]),
            case("3", &["R", "AB"], &[("SIRS", Boolean(false)), ("CRP", Real(150.0))]),
            case("4", &["R", "NC", "IC"], &[("SIRS", Boolean(true)), ("Diag", Text("A".into()))]),
        ])
        .unwrap()
    }

    fn eval(rule: &str) -> RuleReport {
        evaluate_rule(&log(), &rule.parse().unwrap(), 10).unwrap()
    }

    #[test]
    fn boolean_antecedent() {
        let r = eval("SIRS = true => contains \"AB\"");
        assert_eq!((r.support, r.satisfied), (3, 1));
        assert_eq!(r.counterexamples, vec!["2", "4"]);
        assert!((r.confidence.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(eval("SIRS => contains \"AB\"").support, 3);
    }

    #[test]
    fn intervals_and_connectives() {
        assert_eq!(eval("CRP between 109 and 185 => contains \"AB\"").support, 2);
        assert_eq!(eval("SIRS and CRP between 109 and 185 => contains \"AB\"").support, 1);
        assert_eq!(eval("not SIRS or CRP >= 300 => contains \"R\"").support, 2);
        assert_eq!(eval("(Diag = \"A\") => \"NC\" before \"IC\"").confidence, Some(1.0));
        assert_eq!(eval("Diag != \"A\" => not contains \"IC\"").support, 0);
    }

    #[test]
    fn empty_support_is_non_evaluable() {
        let r = eval("CRP < 0 => contains \"AB\"");
        assert_eq!(r.support, 0);
        assert_eq!(r.confidence, None);
    }

    #[test]
    fn unknown_attribute() {
        let rule: DecisionRule = "Foo = 1 => contains \"AB\"".parse().unwrap();
        assert_eq!(
            evaluate_rule(&log(), &rule, 5),
            Err(AnalyticsError::UnknownAttribute("Foo".into()))
        );
    }

    #[test]
    fn syntax_errors() {
        assert!("SIRS = => contains \"x\"".parse::<DecisionRule>().is_err());
        assert!("SIRS contains \"x\"".parse::<DecisionRule>().is_err());
        assert!("CRP between 1 2 => contains \"x\"".parse::<DecisionRule>().is_err());
        assert!("SIRS => contains x".parse::<DecisionRule>().is_err());
        assert!("(SIRS => contains \"x\"".parse::<DecisionRule>().is_err());
    }
}
