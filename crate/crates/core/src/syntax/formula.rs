use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The two logical sorts. Problems carry intuitionistic logic, propositions classical logic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sort {
    #[serde(rename = "prob", alias = "problem")]
    Problem,
    #[serde(rename = "prop", alias = "proposition")]
    Proposition,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Problem => f.write_str("problem"),
            Sort::Proposition => f.write_str("proposition"),
        }
    }
}

/// An atomic formula `name(args..)`. Terms are variables only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub name: String,
    pub sort: Sort,
    pub args: Vec<String>,
}

/// Two-sorted QHC formulas. Negation, biconditional and the modal
/// abbreviations are expanded on construction; see [`Formula::not`] and friends.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(Atom),
    /// Classical truth `tt`.
    True,
    /// Classical falsity `ff`.
    False,
    /// Intuitionistic falsity `bot`.
    Bot,
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Imp(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
    /// `!p`: proposition to problem.
    Bang(Box<Formula>),
    /// `?a`: problem to proposition.
    Quest(Box<Formula>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SortError {
    #[error("operands of `{op}` have different sorts ({left} vs {right})")]
    Mismatch {
        op: &'static str,
        left: Sort,
        right: Sort,
    },
    #[error("`{op}` expects a {expected} but got a {found}")]
    Expected {
        op: &'static str,
        expected: Sort,
        found: Sort,
    },
}

impl Formula {
    pub fn atom(name: &str, sort: Sort, args: &[&str]) -> Formula {
        Formula::Atom(Atom {
            name: name.to_string(),
            sort,
            args: args.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn prop(name: &str, args: &[&str]) -> Formula {
        Formula::atom(name, Sort::Proposition, args)
    }

    pub fn prob(name: &str, args: &[&str]) -> Formula {
        Formula::atom(name, Sort::Problem, args)
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn imp(l: Formula, r: Formula) -> Formula {
        Formula::Imp(Box::new(l), Box::new(r))
    }

    pub fn iff(l: Formula, r: Formula) -> Formula {
        Formula::and(Formula::imp(l.clone(), r.clone()), Formula::imp(r, l))
    }

    pub fn forall(v: &str, body: Formula) -> Formula {
        Formula::Forall(v.to_string(), Box::new(body))
    }

    pub fn exists(v: &str, body: Formula) -> Formula {
        Formula::Exists(v.to_string(), Box::new(body))
    }

    pub fn bang(p: Formula) -> Formula {
        Formula::Bang(Box::new(p))
    }

    pub fn quest(a: Formula) -> Formula {
        Formula::Quest(Box::new(a))
    }

    /// The falsity constant of a sort.
    pub fn falsity(sort: Sort) -> Formula {
        match sort {
            Sort::Problem => Formula::Bot,
            Sort::Proposition => Formula::False,
        }
    }

    /// `~x`, i.e. `x -> falsity` at the sort of `x`.
    pub fn not(x: Formula) -> Formula {
        let s = x.sort_of();
        Formula::imp(x, Formula::falsity(s))
    }

    /// `box p = ?!p`.
    pub fn boxed(p: Formula) -> Formula {
        Formula::quest(Formula::bang(p))
    }

    /// `nabla a = !?a`.
    pub fn nabla(a: Formula) -> Formula {
        Formula::bang(Formula::quest(a))
    }

    /// `dia p = ~box ~p`.
    pub fn dia(p: Formula) -> Formula {
        Formula::not(Formula::boxed(Formula::not(p)))
    }

    /// Nested universal quantification, outermost variable first.
    pub fn forall_all<S: AsRef<str>>(vars: &[S], body: Formula) -> Formula {
        vars.iter()
            .rev()
            .fold(body, |acc, v| Formula::forall(v.as_ref(), acc))
    }

    pub fn exists_all<S: AsRef<str>>(vars: &[S], body: Formula) -> Formula {
        vars.iter()
            .rev()
            .fold(body, |acc, v| Formula::exists(v.as_ref(), acc))
    }

    /// The sort of a well-formed formula.
    pub fn sort_of(&self) -> Sort {
        match self {
            Formula::Atom(a) => a.sort,
            Formula::True | Formula::False | Formula::Quest(_) => Sort::Proposition,
            Formula::Bot | Formula::Bang(_) => Sort::Problem,
            Formula::And(l, _) | Formula::Or(l, _) | Formula::Imp(l, _) => l.sort_of(),
            Formula::Forall(_, b) | Formula::Exists(_, b) => b.sort_of(),
        }
    }

    /// Full sort check; returns the sort of the formula.
    pub fn check_sorts(&self) -> Result<Sort, SortError> {
        match self {
            Formula::Atom(a) => Ok(a.sort),
            Formula::True | Formula::False => Ok(Sort::Proposition),
            Formula::Bot => Ok(Sort::Problem),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Imp(l, r) => {
                let (ls, rs) = (l.check_sorts()?, r.check_sorts()?);
                if ls != rs {
                    return Err(SortError::Mismatch {
                        op: self.op_name(),
                        left: ls,
                        right: rs,
                    });
                }
                Ok(ls)
            }
            Formula::Forall(_, b) | Formula::Exists(_, b) => b.check_sorts(),
            Formula::Bang(p) => match p.check_sorts()? {
                Sort::Proposition => Ok(Sort::Problem),
                found => Err(SortError::Expected {
                    op: "!",
                    expected: Sort::Proposition,
                    found,
                }),
            },
            Formula::Quest(a) => match a.check_sorts()? {
                Sort::Problem => Ok(Sort::Proposition),
                found => Err(SortError::Expected {
                    op: "?",
                    expected: Sort::Problem,
                    found,
                }),
            },
        }
    }

    fn op_name(&self) -> &'static str {
        match self {
            Formula::And(..) => "/\\",
            Formula::Or(..) => "\\/",
            Formula::Imp(..) => "->",
            _ => "?",
        }
    }

    /// Nesting depth of connectives; atoms and constants have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::True | Formula::False | Formula::Bot => 0,
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Imp(l, r) => {
                1 + l.depth().max(r.depth())
            }
            Formula::Forall(_, b)
            | Formula::Exists(_, b)
            | Formula::Bang(b)
            | Formula::Quest(b) => 1 + b.depth(),
        }
    }

    /// Free variables in order of first occurrence.
    pub fn free_vars(&self) -> Vec<String> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match f {
                Formula::Atom(a) => {
                    for v in &a.args {
                        if !bound.contains(v) && !out.contains(v) {
                            out.push(v.clone());
                        }
                    }
                }
                Formula::True | Formula::False | Formula::Bot => {}
                Formula::And(l, r) | Formula::Or(l, r) | Formula::Imp(l, r) => {
                    go(l, bound, out);
                    go(r, bound, out);
                }
                Formula::Forall(v, b) | Formula::Exists(v, b) => {
                    bound.push(v.clone());
                    go(b, bound, out);
                    bound.pop();
                }
                Formula::Bang(b) | Formula::Quest(b) => go(b, bound, out),
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn free_var_set(&self) -> BTreeSet<String> {
        self.free_vars().into_iter().collect()
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// All variable names occurring anywhere, bound or free.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Atom(a) => out.extend(a.args.iter().cloned()),
            Formula::Forall(v, _) | Formula::Exists(v, _) => {
                out.insert(v.clone());
            }
            _ => {}
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        match self {
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Imp(l, r) => {
                l.visit(f);
                r.visit(f);
            }
            Formula::Forall(_, b)
            | Formula::Exists(_, b)
            | Formula::Bang(b)
            | Formula::Quest(b) => b.visit(f),
            _ => {}
        }
    }

    /// Atoms in order of first occurrence, deduplicated by name.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out: Vec<Atom> = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Atom(a) = f {
                if !out.iter().any(|b| b.name == a.name) {
                    out.push(a.clone());
                }
            }
        });
        out
    }

    pub fn any(&self, pred: impl Fn(&Formula) -> bool) -> bool {
        let mut found = false;
        self.visit(&mut |f| found |= pred(f));
        found
    }

    /// Universal closure over the free variables, in order of first occurrence.
    pub fn universal_closure(&self) -> Formula {
        Formula::forall_all(&self.free_vars(), self.clone())
    }

    /// Strips a prefix of universal quantifiers, returning the variables and the matrix.
    pub fn strip_foralls(&self) -> (Vec<String>, &Formula) {
        let mut vars = Vec::new();
        let mut cur = self;
        while let Formula::Forall(v, b) = cur {
            vars.push(v.clone());
            cur = b;
        }
        (vars, cur)
    }

    /// Capture-avoiding simultaneous substitution of variables by variables.
    pub fn substitute(&self, binding: &BTreeMap<String, String>) -> Formula {
        replace(self, binding, &BTreeMap::new())
    }

    pub fn substitute1(&self, var: &str, term: &str) -> Formula {
        let mut m = BTreeMap::new();
        m.insert(var.to_string(), term.to_string());
        self.substitute(&m)
    }

    /// Alpha-equivalence: equality up to renaming of bound variables.
    pub fn alpha_eq(&self, other: &Formula) -> bool {
        alpha_eq_in(self, other, &mut Vec::new())
    }

    /// Maps every atom through `f`, leaving structure intact.
    pub fn map_atoms(&self, f: &mut impl FnMut(&Atom) -> Formula) -> Formula {
        match self {
            Formula::Atom(a) => f(a),
            Formula::True | Formula::False | Formula::Bot => self.clone(),
            Formula::And(l, r) => Formula::and(l.map_atoms(f), r.map_atoms(f)),
            Formula::Or(l, r) => Formula::or(l.map_atoms(f), r.map_atoms(f)),
            Formula::Imp(l, r) => Formula::imp(l.map_atoms(f), r.map_atoms(f)),
            Formula::Forall(v, b) => Formula::forall(v, b.map_atoms(f)),
            Formula::Exists(v, b) => Formula::exists(v, b.map_atoms(f)),
            Formula::Bang(b) => Formula::bang(b.map_atoms(f)),
            Formula::Quest(b) => Formula::quest(b.map_atoms(f)),
        }
    }

    /// If this is `x -> falsity` at the sort of `x`, returns `x`.
    pub fn as_negation(&self) -> Option<&Formula> {
        match self {
            Formula::Imp(x, r) if matches!(**r, Formula::Bot | Formula::False) => Some(x),
            _ => None,
        }
    }

    /// If this is `(a -> b) /\ (b -> a)`, returns `(a, b)`.
    pub fn as_iff(&self) -> Option<(&Formula, &Formula)> {
        if let Formula::And(l, r) = self {
            if let (Formula::Imp(a, b), Formula::Imp(c, d)) = (&**l, &**r) {
                if a == d && b == c {
                    return Some((a, b));
                }
            }
        }
        None
    }
}

/// A metavariable instance `lambda params. body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Family {
    pub params: Vec<String>,
    pub body: Formula,
}

impl Family {
    pub fn constant(body: Formula) -> Family {
        Family {
            params: Vec::new(),
            body,
        }
    }

    pub fn new(params: &[&str], body: Formula) -> Family {
        Family {
            params: params.iter().map(|s| s.to_string()).collect(),
            body,
        }
    }

    /// `body[params := args]`.
    pub fn apply(&self, args: &[String]) -> Formula {
        let m: BTreeMap<String, String> = self
            .params
            .iter()
            .cloned()
            .zip(args.iter().cloned())
            .collect();
        self.body.substitute(&m)
    }

    /// Free variables of the body other than the parameters.
    pub fn free_vars(&self) -> BTreeSet<String> {
        self.body
            .free_vars()
            .into_iter()
            .filter(|v| !self.params.contains(v))
            .collect()
    }
}

/// A name not in `avoid`, derived from `base` by priming.
pub fn fresh_var(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut v = format!("{base}'");
    while avoid.contains(&v) {
        v.push('\'');
    }
    v
}

/// Replaces the atoms named in `defs` by their families, avoiding capture.
pub fn expand_atoms(f: &Formula, defs: &BTreeMap<String, Family>) -> Formula {
    replace(f, &BTreeMap::new(), defs)
}

/// Simultaneous capture-avoiding replacement of variables and of the atoms
/// named in `metas` by their families.
pub(crate) fn replace(
    f: &Formula,
    vars: &BTreeMap<String, String>,
    metas: &BTreeMap<String, Family>,
) -> Formula {
    match f {
        Formula::Atom(a) => {
            let args: Vec<String> = a
                .args
                .iter()
                .map(|v| vars.get(v).cloned().unwrap_or_else(|| v.clone()))
                .collect();
            match metas.get(&a.name) {
                Some(fam) => fam.apply(&args),
                None => Formula::Atom(Atom {
                    name: a.name.clone(),
                    sort: a.sort,
                    args,
                }),
            }
        }
        Formula::True | Formula::False | Formula::Bot => f.clone(),
        Formula::And(l, r) => Formula::and(replace(l, vars, metas), replace(r, vars, metas)),
        Formula::Or(l, r) => Formula::or(replace(l, vars, metas), replace(r, vars, metas)),
        Formula::Imp(l, r) => Formula::imp(replace(l, vars, metas), replace(r, vars, metas)),
        Formula::Bang(b) => Formula::bang(replace(b, vars, metas)),
        Formula::Quest(b) => Formula::quest(replace(b, vars, metas)),
        Formula::Forall(v, b) | Formula::Exists(v, b) => {
            let mut inner = vars.clone();
            inner.remove(v);
            // Variables that could be captured by this binder.
            let body_free = b.free_var_set();
            let mut incoming: BTreeSet<String> = BTreeSet::new();
            for (k, t) in &inner {
                if body_free.contains(k) {
                    incoming.insert(t.clone());
                }
            }
            let metas_in_body: BTreeSet<String> = b.atoms().into_iter().map(|a| a.name).collect();
            for (name, fam) in metas {
                if metas_in_body.contains(name) {
                    incoming.extend(fam.free_vars());
                }
            }
            let bv = if incoming.contains(v) {
                let mut avoid = incoming.clone();
                avoid.extend(b.all_vars());
                avoid.extend(inner.values().cloned());
                let nv = fresh_var(v, &avoid);
                inner.insert(v.clone(), nv.clone());
                nv
            } else {
                v.clone()
            };
            let body = replace(b, &inner, metas);
            match f {
                Formula::Forall(..) => Formula::forall(&bv, body),
                _ => Formula::exists(&bv, body),
            }
        }
    }
}

fn lookup_bound(env: &[(String, String)], v: &str, left: bool) -> Option<usize> {
    env.iter()
        .rposition(|(a, b)| if left { a == v } else { b == v })
}

pub(crate) fn alpha_eq_in(a: &Formula, b: &Formula, env: &mut Vec<(String, String)>) -> bool {
    match (a, b) {
        (Formula::Atom(x), Formula::Atom(y)) => {
            x.name == y.name
                && x.sort == y.sort
                && x.args.len() == y.args.len()
                && x.args.iter().zip(&y.args).all(|(u, v)| {
                    match (lookup_bound(env, u, true), lookup_bound(env, v, false)) {
                        (Some(i), Some(j)) => i == j,
                        (None, None) => u == v,
                        _ => false,
                    }
                })
        }
        (Formula::True, Formula::True)
        | (Formula::False, Formula::False)
        | (Formula::Bot, Formula::Bot) => true,
        (Formula::And(a1, a2), Formula::And(b1, b2))
        | (Formula::Or(a1, a2), Formula::Or(b1, b2))
        | (Formula::Imp(a1, a2), Formula::Imp(b1, b2)) => {
            alpha_eq_in(a1, b1, env) && alpha_eq_in(a2, b2, env)
        }
        (Formula::Bang(x), Formula::Bang(y)) | (Formula::Quest(x), Formula::Quest(y)) => {
            alpha_eq_in(x, y, env)
        }
        (Formula::Forall(u, x), Formula::Forall(v, y))
        | (Formula::Exists(u, x), Formula::Exists(v, y)) => {
            env.push((u.clone(), v.clone()));
            let r = alpha_eq_in(x, y, env);
            env.pop();
            r
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(args: &[&str]) -> Formula {
        Formula::prop("p", args)
    }

    #[test]
    fn sorts() {
        let a = Formula::prob("a", &[]);
        let q = Formula::prop("q", &[]);
        assert_eq!(Formula::quest(a.clone()).sort_of(), Sort::Proposition);
        assert_eq!(Formula::bang(q.clone()).sort_of(), Sort::Problem);
        assert_eq!(Formula::boxed(q.clone()).sort_of(), Sort::Proposition);
        assert_eq!(Formula::nabla(a.clone()).check_sorts(), Ok(Sort::Problem));
        assert!(Formula::bang(a.clone()).check_sorts().is_err());
        assert!(Formula::and(a, q).check_sorts().is_err());
    }

    #[test]
    fn substitute_free_and_bound() {
        let f = Formula::prop("bet", &["x", "y", "z"]);
        assert_eq!(f.substitute1("x", "w"), Formula::prop("bet", &["w", "y", "z"]));
        let g = Formula::forall("x", p(&["x"]));
        assert_eq!(g.substitute1("x", "w"), g);
    }

    #[test]
    fn substitute_avoids_capture() {
        let f = Formula::exists("x", Formula::prop("q", &["x", "y"]));
        let g = f.substitute1("y", "x");
        assert_eq!(
            g,
            Formula::exists("x'", Formula::prop("q", &["x'", "x"]))
        );
        assert!(!g.alpha_eq(&Formula::exists("x", Formula::prop("q", &["x", "x"]))));
    }

    #[test]
    fn alpha_equivalence() {
        let a = Formula::forall("x", p(&["x"]));
        let b = Formula::forall("y", p(&["y"]));
        assert!(a.alpha_eq(&b));
        assert!(!a.alpha_eq(&Formula::forall("y", p(&["x"]))));
        assert!(!p(&["x"]).alpha_eq(&p(&["y"])));
    }

    #[test]
    fn family_application_avoids_capture() {
        let fam = Family::new(&["u"], Formula::exists("x", Formula::prop("q", &["u", "x"])));
        let out = fam.apply(&["x".to_string()]);
        assert!(out.alpha_eq(&Formula::exists("z", Formula::prop("q", &["x", "z"]))));
    }

    #[test]
    fn closure_order() {
        let f = Formula::imp(Formula::prop("r", &["b", "a"]), p(&["c"]));
        assert_eq!(f.free_vars(), vec!["b", "a", "c"]);
        assert!(f.universal_closure().is_closed());
    }
}
