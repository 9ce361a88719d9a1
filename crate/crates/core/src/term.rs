//! Structured terms for events and propositions: `name(arg, ...)`, symbols,
//! numbers and pattern variables `?x`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone)]
pub enum Term {
    Var(String),
    Sym(String),
    Num(f64),
    App(String, Vec<Term>),
}

pub type Bindings = BTreeMap<String, Term>;

impl Term {
    pub fn sym(s: impl Into<String>) -> Term {
        Term::Sym(s.into())
    }

    pub fn app(name: impl Into<String>, args: Vec<Term>) -> Term {
        Term::App(name.into(), args)
    }

    /// Numbers are rounded to 1e-3 so that printed event terms stay stable.
    pub fn num(v: f64) -> Term {
        let r = (v * 1000.0).round() / 1000.0;
        Term::Num(if r == 0.0 { 0.0 } else { r })
    }

    pub fn functor(&self) -> &str {
        match self {
            Term::App(f, _) | Term::Sym(f) | Term::Var(f) => f,
            Term::Num(_) => "",
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::App(_, a) => a,
            _ => &[],
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Term::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Term::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, a) => a.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone())
                }
            }
            Term::App(_, a) => a.iter().for_each(|t| t.vars(out)),
            _ => {}
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Term::Var(_) => 0,
            Term::Num(_) => 1,
            Term::Sym(_) => 2,
            Term::App(..) => 3,
        }
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Term::Var(a), Term::Var(b)) | (Term::Sym(a), Term::Sym(b)) => a.cmp(b),
            (Term::Num(a), Term::Num(b)) => a.total_cmp(b),
            (Term::App(f, a), Term::App(g, b)) => f.cmp(g).then_with(|| a.cmp(b)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Term {}

fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Sym(s) => write!(f, "{s}"),
            Term::Num(v) => fmt_num(*v, f),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

struct TermVisitor;

impl serde::de::Visitor<'_> for TermVisitor {
    type Value = Term;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a term string or a number")
    }

    fn visit_str<E: serde::de::Error>(self, s: &str) -> Result<Term, E> {
        parse_term(s).map_err(E::custom)
    }

    fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Term, E> {
        Ok(Term::Num(v))
    }

    fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Term, E> {
        Ok(Term::Num(v as f64))
    }

    fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Term, E> {
        Ok(Term::Num(v as f64))
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(TermVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("term syntax error at column {col}: expected {expected}")]
pub struct TermParseError {
    pub col: usize,
    pub expected: String,
}

pub(crate) fn is_symbol_char(c: char) -> bool {
    c.is_alphanumeric() || "-_*+/<>=!?.:'@#$%&^~".contains(c)
}

struct TermParser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl TermParser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn err(&self, expected: &str) -> TermParseError {
        TermParseError {
            col: self.col(),
            expected: expected.to_string(),
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(is_symbol_char) {
            self.pos += 1;
        }
        let lo = self.chars.get(start).map_or(self.src.len(), |c| c.0);
        let hi = self.chars.get(self.pos).map_or(self.src.len(), |c| c.0);
        self.src[lo..hi].to_string()
    }

    fn term(&mut self, depth: usize) -> Result<Term, TermParseError> {
        if depth > 256 {
            return Err(self.err("shallower nesting"));
        }
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("term")),
            Some('?') => {
                self.pos += 1;
                let w = self.word();
                if w.is_empty() {
                    return Err(self.err("variable name"));
                }
                Ok(Term::Var(w))
            }
            Some(c) if is_symbol_char(c) => {
                let w = self.word();
                if let Some(v) = parse_number(&w) {
                    return Ok(Term::Num(v));
                }
                self.skip_ws();
                if self.peek() == Some('(') {
                    self.pos += 1;
                    let mut args = Vec::new();
                    self.skip_ws();
                    if self.peek() == Some(')') {
                        self.pos += 1;
                        return Ok(Term::App(w, args));
                    }
                    loop {
                        args.push(self.term(depth + 1)?);
                        self.skip_ws();
                        match self.peek() {
                            Some(',') => self.pos += 1,
                            Some(')') => {
                                self.pos += 1;
                                return Ok(Term::App(w, args));
                            }
                            _ => return Err(self.err("',' or ')'")),
                        }
                    }
                }
                Ok(Term::Sym(w))
            }
            Some(_) => Err(self.err("symbol, number or variable")),
        }
    }
}

pub(crate) fn parse_number(w: &str) -> Option<f64> {
    let first = w.chars().next()?;
    if !(first.is_ascii_digit() || first == '-' || first == '+' || first == '.') {
        return None;
    }
    if w.chars()
        .any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
    {
        return None;
    }
    w.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_term(src: &str) -> Result<Term, TermParseError> {
    let mut p = TermParser {
        chars: src.char_indices().collect(),
        pos: 0,
        src,
    };
    let t = p.term(0)?;
    p.skip_ws();
    if p.peek().is_some() {
        return Err(p.err("end of input"));
    }
    Ok(t)
}

/// One-way matching of `pattern` against a ground term, extending `b`.
pub fn match_term(pattern: &Term, ground: &Term, b: &mut Bindings) -> bool {
    match (pattern, ground) {
        (Term::Var(v), g) => match b.get(v) {
            Some(bound) => bound == g,
            None => {
                b.insert(v.clone(), g.clone());
                true
            }
        },
        (Term::App(f, pa), Term::App(g, ga)) => {
            f == g && pa.len() == ga.len() && pa.iter().zip(ga).all(|(p, g)| match_term(p, g, b))
        }
        (p, g) => p == g,
    }
}

pub fn substitute(t: &Term, b: &Bindings) -> Term {
    match t {
        Term::Var(v) => b.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::App(f, a) => Term::App(f.clone(), a.iter().map(|x| substitute(x, b)).collect()),
        _ => t.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let t = parse_term("nav-event(set-travel-mode(doorway))").unwrap();
        assert_eq!(t.to_string(), "nav-event(set-travel-mode(doorway))");
        let t = parse_term("at( l1 , A-111, 2.5, -3)").unwrap();
        assert_eq!(t.to_string(), "at(l1, A-111, 2.5, -3)");
        assert_eq!(parse_term("?x").unwrap(), Term::Var("x".into()));
        assert!(parse_term("f(a,").is_err());
        assert!(parse_term("f(a) b").is_err());
        assert!(parse_term("").is_err());
    }

    #[test]
    fn matching() {
        let p = parse_term("travel-mode(?m)").unwrap();
        let g = parse_term("travel-mode(office)").unwrap();
        let mut b = Bindings::new();
        assert!(match_term(&p, &g, &mut b));
        assert_eq!(b["m"], Term::sym("office"));
        let p2 = parse_term("pair(?a, ?a)").unwrap();
        assert!(!match_term(
            &p2,
            &parse_term("pair(x, y)").unwrap(),
            &mut Bindings::new()
        ));
        assert_eq!(substitute(&p, &b), g);
    }

    #[test]
    fn num_rounding() {
        assert_eq!(Term::num(2300.0004).to_string(), "2300");
        assert_eq!(Term::num(-0.0001).to_string(), "0");
        assert_eq!(Term::num(12.3456).to_string(), "12.346");
    }
}
