use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::formula::{Atom, Formula, Sort};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomDecl {
    pub name: String,
    pub sort: Sort,
    #[serde(default)]
    pub arity: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub atoms: Vec<AtomDecl>,
}

#[derive(Debug, Error)]
pub enum SignatureError {
    #[error("duplicate atom `{0}` in signature")]
    Duplicate(String),
    #[error("invalid signature JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn with(mut self, name: &str, sort: Sort, arity: usize) -> Signature {
        self.add(name, sort, arity);
        self
    }

    pub fn add(&mut self, name: &str, sort: Sort, arity: usize) {
        self.atoms.retain(|a| a.name != name);
        self.atoms.push(AtomDecl {
            name: name.to_string(),
            sort,
            arity,
        });
    }

    pub fn get(&self, name: &str) -> Option<&AtomDecl> {
        self.atoms.iter().find(|a| a.name == name)
    }

    pub fn validate(&self) -> Result<(), SignatureError> {
        for (i, a) in self.atoms.iter().enumerate() {
            if self.atoms[..i].iter().any(|b| b.name == a.name) {
                return Err(SignatureError::Duplicate(a.name.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Signature, SignatureError> {
        let sig: Signature = serde_json::from_str(text)?;
        sig.validate()?;
        Ok(sig)
    }

    /// Signature of every atom occurring in `f`.
    pub fn of_formula(f: &Formula) -> Signature {
        let mut sig = Signature::new();
        for a in f.atoms() {
            sig.add(&a.name, a.sort, a.args.len());
        }
        sig
    }

    pub fn merge(&mut self, other: &Signature) {
        for a in &other.atoms {
            if self.get(&a.name).is_none() {
                self.atoms.push(a.clone());
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownAtom(String),
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    SortClash(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind} at offset {pos}")]
pub struct ParseError {
    /// Character offset into the input.
    pub pos: usize,
    pub kind: ParseErrorKind,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::UnknownAtom(n) => write!(f, "unknown atom `{n}`"),
            ParseErrorKind::Arity {
                name,
                expected,
                found,
            } => write!(f, "atom `{name}` expects {expected} arguments, got {found}"),
            ParseErrorKind::SortClash(m) => write!(f, "sort clash: {m}"),
        }
    }
}

impl ParseError {
    fn syntax(pos: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            pos,
            kind: ParseErrorKind::Syntax(msg.into()),
        }
    }

    fn clash(pos: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            pos,
            kind: ParseErrorKind::SortClash(msg.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    And,
    Or,
    Imp,
    Iff,
    Not,
    Bang,
    Quest,
    Box,
    Nabla,
    Dia,
    Forall,
    Exists,
    Tt,
    Ff,
    Bot,
    Eof,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let (tok, len) = if rest.starts_with("<->") {
            (Tok::Iff, 3)
        } else if rest.starts_with("->") {
            (Tok::Imp, 2)
        } else if rest.starts_with("/\\") {
            (Tok::And, 2)
        } else if rest.starts_with("\\/") {
            (Tok::Or, 2)
        } else {
            match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                ',' => (Tok::Comma, 1),
                '.' => (Tok::Dot, 1),
                '~' | '¬' => (Tok::Not, 1),
                '!' => (Tok::Bang, 1),
                '?' => (Tok::Quest, 1),
                '∧' => (Tok::And, 1),
                '∨' => (Tok::Or, 1),
                '→' => (Tok::Imp, 1),
                '↔' => (Tok::Iff, 1),
                '∀' => (Tok::Forall, 1),
                '∃' => (Tok::Exists, 1),
                '□' => (Tok::Box, 1),
                '∇' => (Tok::Nabla, 1),
                '◇' => (Tok::Dia, 1),
                '⊥' => (Tok::Bot, 1),
                '⊤' => (Tok::Tt, 1),
                c if is_ident_start(c) => {
                    let mut j = i;
                    while j < chars.len() && is_ident_char(chars[j]) {
                        j += 1;
                    }
                    let word: String = chars[i..j].iter().collect();
                    let tok = match word.as_str() {
                        "forall" => Tok::Forall,
                        "exists" => Tok::Exists,
                        "box" => Tok::Box,
                        "nabla" => Tok::Nabla,
                        "dia" => Tok::Dia,
                        "tt" => Tok::Tt,
                        "ff" => Tok::Ff,
                        "bot" => Tok::Bot,
                        _ => Tok::Ident(word),
                    };
                    (tok, j - i)
                }
                c => return Err(ParseError::syntax(i, format!("unexpected character `{c}`"))),
            }
        };
        out.push((tok, start));
        i += len;
    }
    out.push((Tok::Eof, chars.len()));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    And,
    Or,
    Imp,
    Iff,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UnOp {
    Not,
    Bang,
    Quest,
    Box,
    Nabla,
    Dia,
}

#[derive(Clone, Debug)]
enum Raw {
    Ident(String, Vec<String>, usize),
    Tt,
    Ff,
    Bot,
    Bin(BinOp, Box<Raw>, Box<Raw>, usize),
    Un(UnOp, Box<Raw>, usize),
    Quant(bool, String, Box<Raw>),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::syntax(self.pos(), format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(ParseError::syntax(self.pos(), format!("expected {what}"))),
        }
    }

    fn iff(&mut self) -> Result<Raw, ParseError> {
        let l = self.imp()?;
        if *self.peek() == Tok::Iff {
            let pos = self.pos();
            self.bump();
            let r = self.imp()?;
            if *self.peek() == Tok::Iff {
                return Err(ParseError::syntax(
                    self.pos(),
                    "`<->` is not associative; add parentheses",
                ));
            }
            return Ok(Raw::Bin(BinOp::Iff, Box::new(l), Box::new(r), pos));
        }
        Ok(l)
    }

    fn imp(&mut self) -> Result<Raw, ParseError> {
        let l = self.or()?;
        if *self.peek() == Tok::Imp {
            let pos = self.pos();
            self.bump();
            let r = self.imp()?;
            return Ok(Raw::Bin(BinOp::Imp, Box::new(l), Box::new(r), pos));
        }
        Ok(l)
    }

    fn or(&mut self) -> Result<Raw, ParseError> {
        let mut l = self.and()?;
        while *self.peek() == Tok::Or {
            let pos = self.pos();
            self.bump();
            let r = self.and()?;
            l = Raw::Bin(BinOp::Or, Box::new(l), Box::new(r), pos);
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<Raw, ParseError> {
        let mut l = self.unary()?;
        while *self.peek() == Tok::And {
            let pos = self.pos();
            self.bump();
            let r = self.unary()?;
            l = Raw::Bin(BinOp::And, Box::new(l), Box::new(r), pos);
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<Raw, ParseError> {
        let pos = self.pos();
        let op = match self.peek() {
            Tok::Not => Some(UnOp::Not),
            Tok::Bang => Some(UnOp::Bang),
            Tok::Quest => Some(UnOp::Quest),
            Tok::Box => Some(UnOp::Box),
            Tok::Nabla => Some(UnOp::Nabla),
            Tok::Dia => Some(UnOp::Dia),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let body = self.unary()?;
            return Ok(Raw::Un(op, Box::new(body), pos));
        }
        let universal = match self.peek() {
            Tok::Forall => Some(true),
            Tok::Exists => Some(false),
            _ => None,
        };
        if let Some(universal) = universal {
            self.bump();
            let mut vars = vec![self.ident("a bound variable")?];
            loop {
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                        vars.push(self.ident("a bound variable")?);
                    }
                    Tok::Ident(_) => vars.push(self.ident("a bound variable")?),
                    _ => break,
                }
            }
            self.expect(Tok::Dot, "`.` after quantified variables")?;
            let body = self.unary()?;
            return Ok(vars
                .into_iter()
                .rev()
                .fold(body, |acc, v| Raw::Quant(universal, v, Box::new(acc))));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Raw, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::LParen => {
                let f = self.iff()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Tt => Ok(Raw::Tt),
            Tok::Ff => Ok(Raw::Ff),
            Tok::Bot => Ok(Raw::Bot),
            Tok::Ident(name) => {
                let mut args = Vec::new();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    if *self.peek() != Tok::RParen {
                        args.push(self.ident("a variable")?);
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            args.push(self.ident("a variable")?);
                        }
                    }
                    self.expect(Tok::RParen, "`)` closing the argument list")?;
                }
                Ok(Raw::Ident(name, args, pos))
            }
            Tok::Eof => Err(ParseError::syntax(pos, "unexpected end of input")),
            t => Err(ParseError::syntax(pos, format!("unexpected token {t:?}"))),
        }
    }
}

/// Sort of a node during inference: known, or an atom name whose sort is still open.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Ty {
    Known(Sort),
    Var(String),
}

struct Infer<'a> {
    sig: Option<&'a Signature>,
    parent: BTreeMap<String, String>,
    value: BTreeMap<String, Sort>,
    arity: BTreeMap<String, usize>,
}

impl<'a> Infer<'a> {
    fn find(&mut self, v: &str) -> String {
        let mut cur = v.to_string();
        while let Some(p) = self.parent.get(&cur) {
            if *p == cur {
                break;
            }
            cur = p.clone();
        }
        cur
    }

    fn resolve(&mut self, t: &Ty) -> Ty {
        match t {
            Ty::Known(s) => Ty::Known(*s),
            Ty::Var(v) => {
                let r = self.find(v);
                match self.value.get(&r) {
                    Some(s) => Ty::Known(*s),
                    None => Ty::Var(r),
                }
            }
        }
    }

    fn unify(&mut self, a: &Ty, b: &Ty, pos: usize, what: &str) -> Result<(), ParseError> {
        match (self.resolve(a), self.resolve(b)) {
            (Ty::Known(x), Ty::Known(y)) => {
                if x == y {
                    Ok(())
                } else {
                    Err(ParseError::clash(pos, format!("{what}: {x} vs {y}")))
                }
            }
            (Ty::Var(v), Ty::Known(s)) | (Ty::Known(s), Ty::Var(v)) => {
                self.value.insert(v, s);
                Ok(())
            }
            (Ty::Var(v), Ty::Var(w)) => {
                if v != w {
                    self.parent.insert(v, w);
                }
                Ok(())
            }
        }
    }

    fn walk(&mut self, r: &Raw) -> Result<Ty, ParseError> {
        match r {
            Raw::Ident(name, args, pos) => {
                if let Some(sig) = self.sig {
                    let decl = sig.get(name).ok_or(ParseError {
                        pos: *pos,
                        kind: ParseErrorKind::UnknownAtom(name.clone()),
                    })?;
                    if decl.arity != args.len() {
                        return Err(ParseError {
                            pos: *pos,
                            kind: ParseErrorKind::Arity {
                                name: name.clone(),
                                expected: decl.arity,
                                found: args.len(),
                            },
                        });
                    }
                    return Ok(Ty::Known(decl.sort));
                }
                match self.arity.get(name) {
                    Some(&n) if n != args.len() => {
                        return Err(ParseError {
                            pos: *pos,
                            kind: ParseErrorKind::Arity {
                                name: name.clone(),
                                expected: n,
                                found: args.len(),
                            },
                        })
                    }
                    _ => {
                        self.arity.insert(name.clone(), args.len());
                    }
                }
                self.parent.entry(name.clone()).or_insert_with(|| name.clone());
                Ok(Ty::Var(name.clone()))
            }
            Raw::Tt | Raw::Ff => Ok(Ty::Known(Sort::Proposition)),
            Raw::Bot => Ok(Ty::Known(Sort::Problem)),
            Raw::Bin(op, l, rr, pos) => {
                let lt = self.walk(l)?;
                let rt = self.walk(rr)?;
                let name = match op {
                    BinOp::And => "/\\",
                    BinOp::Or => "\\/",
                    BinOp::Imp => "->",
                    BinOp::Iff => "<->",
                };
                self.unify(&lt, &rt, *pos, &format!("operands of `{name}` differ"))?;
                Ok(lt)
            }
            Raw::Un(op, body, pos) => {
                let bt = self.walk(body)?;
                let (need, out) = match op {
                    UnOp::Not => return Ok(bt),
                    UnOp::Bang => (Sort::Proposition, Sort::Problem),
                    UnOp::Quest => (Sort::Problem, Sort::Proposition),
                    UnOp::Box | UnOp::Dia => (Sort::Proposition, Sort::Proposition),
                    UnOp::Nabla => (Sort::Problem, Sort::Problem),
                };
                let opname = match op {
                    UnOp::Bang => "!",
                    UnOp::Quest => "?",
                    UnOp::Box => "box",
                    UnOp::Dia => "dia",
                    _ => "nabla",
                };
                self.unify(
                    &bt,
                    &Ty::Known(need),
                    *pos,
                    &format!("`{opname}` needs a {need}"),
                )?;
                Ok(Ty::Known(out))
            }
            Raw::Quant(_, _, body) => self.walk(body),
        }
    }

    fn sort_of_atom(&mut self, name: &str) -> Sort {
        if let Some(sig) = self.sig {
            if let Some(d) = sig.get(name) {
                return d.sort;
            }
        }
        match self.resolve(&Ty::Var(name.to_string())) {
            Ty::Known(s) => s,
            Ty::Var(_) => Sort::Proposition,
        }
    }

    fn build(&mut self, r: &Raw) -> Formula {
        match r {
            Raw::Ident(name, args, _) => Formula::Atom(Atom {
                name: name.clone(),
                sort: self.sort_of_atom(name),
                args: args.clone(),
            }),
            Raw::Tt => Formula::True,
            Raw::Ff => Formula::False,
            Raw::Bot => Formula::Bot,
            Raw::Bin(op, l, rr, _) => {
                let (l, rr) = (self.build(l), self.build(rr));
                match op {
                    BinOp::And => Formula::and(l, rr),
                    BinOp::Or => Formula::or(l, rr),
                    BinOp::Imp => Formula::imp(l, rr),
                    BinOp::Iff => Formula::iff(l, rr),
                }
            }
            Raw::Un(op, body, _) => {
                let b = self.build(body);
                match op {
                    UnOp::Not => Formula::not(b),
                    UnOp::Bang => Formula::bang(b),
                    UnOp::Quest => Formula::quest(b),
                    UnOp::Box => Formula::boxed(b),
                    UnOp::Nabla => Formula::nabla(b),
                    UnOp::Dia => Formula::dia(b),
                }
            }
            Raw::Quant(universal, v, body) => {
                let b = self.build(body);
                if *universal {
                    Formula::forall(v, b)
                } else {
                    Formula::exists(v, b)
                }
            }
        }
    }
}

fn parse_with(text: &str, sig: Option<&Signature>) -> Result<Formula, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        i: 0,
    };
    let raw = p.iff()?;
    if *p.peek() != Tok::Eof {
        return Err(ParseError::syntax(p.pos(), "trailing input"));
    }
    let mut inf = Infer {
        sig,
        parent: BTreeMap::new(),
        value: BTreeMap::new(),
        arity: BTreeMap::new(),
    };
    inf.walk(&raw)?;
    Ok(inf.build(&raw))
}

/// Parses against a signature: every atom must be declared with matching arity.
pub fn parse(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    parse_with(text, Some(sig))
}

/// Parses without a signature, inferring atom sorts from their use.
/// Atoms whose sort is unconstrained default to propositions.
pub fn parse_inferred(text: &str) -> Result<Formula, ParseError> {
    parse_with(text, None)
}

/// Reads a formula file: one formula per line, `#` starts a comment.
/// Returns `(line number, text)` pairs for the non-blank lines.
pub fn formula_lines(text: &str) -> Vec<(usize, String)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = match l.find('#') {
                Some(k) => &l[..k],
                None => l,
            };
            let l = l.trim();
            (!l.is_empty()).then(|| (i + 1, l.to_string()))
        })
        .collect()
}
