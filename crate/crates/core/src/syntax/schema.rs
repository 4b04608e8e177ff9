use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::formula::{replace, Family, Formula, Sort};
use super::parse::{parse, ParseError, Signature};

/// A schematic letter: an atom of the schema body standing for an arbitrary
/// formula family of the given sort and parameter count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaVar {
    pub name: String,
    pub sort: Sort,
    pub arity: usize,
}

/// A formula with metavariables. Free variables of the body are schematic
/// term variables; they can be instantiated by any variable.
#[derive(Clone, Debug)]
pub struct Schema {
    pub name: String,
    pub metas: Vec<MetaVar>,
    pub body: Formula,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    pub metas: BTreeMap<String, Family>,
    pub terms: BTreeMap<String, String>,
}

impl Assignment {
    pub fn new() -> Assignment {
        Assignment::default()
    }

    pub fn set(mut self, meta: &str, fam: Family) -> Assignment {
        self.metas.insert(meta.to_string(), fam);
        self
    }

    pub fn constant(self, meta: &str, f: Formula) -> Assignment {
        self.set(meta, Family::constant(f))
    }

    pub fn term(mut self, var: &str, t: &str) -> Assignment {
        self.terms.insert(var.to_string(), t.to_string());
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("metavariable `{0}` is not assigned")]
    Missing(String),
    #[error("metavariable `{name}` is a {expected} but was assigned a {found}")]
    SortMismatch {
        name: String,
        expected: Sort,
        found: Sort,
    },
    #[error("metavariable `{name}` takes {expected} parameters, family has {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("`{0}` is not a metavariable of this schema")]
    Unknown(String),
    #[error("schema text: {0}")]
    Parse(#[from] ParseError),
}

impl Schema {
    /// Parses a schema body. `metas` lists `(name, sort, arity)`.
    pub fn parse(name: &str, text: &str, metas: &[(&str, Sort, usize)]) -> Result<Schema, SchemaError> {
        let mut sig = Signature::new();
        for (n, s, a) in metas {
            sig.add(n, *s, *a);
        }
        let body = parse(text, &sig)?;
        Ok(Schema {
            name: name.to_string(),
            metas: metas
                .iter()
                .map(|(n, s, a)| MetaVar {
                    name: n.to_string(),
                    sort: *s,
                    arity: *a,
                })
                .collect(),
            body,
        })
    }

    pub fn term_vars(&self) -> Vec<String> {
        self.body.free_vars()
    }

    fn meta(&self, name: &str) -> Option<&MetaVar> {
        self.metas.iter().find(|m| m.name == name)
    }

    /// Instance of the body, without closure. Unassigned term variables stay as they are.
    pub fn instantiate_open(&self, a: &Assignment) -> Result<Formula, SchemaError> {
        for k in a.metas.keys() {
            if self.meta(k).is_none() {
                return Err(SchemaError::Unknown(k.clone()));
            }
        }
        for m in &self.metas {
            let fam = a.metas.get(&m.name).ok_or(SchemaError::Missing(m.name.clone()))?;
            if fam.params.len() != m.arity {
                return Err(SchemaError::Arity {
                    name: m.name.clone(),
                    expected: m.arity,
                    found: fam.params.len(),
                });
            }
            let found = fam.body.sort_of();
            if found != m.sort {
                return Err(SchemaError::SortMismatch {
                    name: m.name.clone(),
                    expected: m.sort,
                    found,
                });
            }
        }
        Ok(replace(&self.body, &a.terms, &a.metas))
    }

    /// Instance of the body under its universal closure.
    pub fn instantiate(&self, a: &Assignment) -> Result<Formula, SchemaError> {
        Ok(self.instantiate_open(a)?.universal_closure())
    }

    /// Finds an assignment whose open instance is alpha-equivalent to `target`.
    pub fn match_formula(&self, target: &Formula) -> Option<Assignment> {
        let mut m = Matcher {
            schema: self,
            asg: Assignment::new(),
            deferred: Vec::new(),
        };
        if !m.go(&self.body, target, &mut Vec::new()) {
            return None;
        }
        let deferred = std::mem::take(&mut m.deferred);
        let asg = m.resolve(&deferred, 0)?;
        let inst = self.instantiate_open(&asg).ok()?;
        inst.alpha_eq(target).then_some(asg)
    }
}

struct Deferred {
    pattern: Formula,
    target: Formula,
    binders: Vec<(String, String)>,
}

struct Matcher<'a> {
    schema: &'a Schema,
    asg: Assignment,
    deferred: Vec<Deferred>,
}

impl<'a> Matcher<'a> {
    /// Image of a pattern variable: its bound partner, its term assignment,
    /// or `None` if it is a still unassigned term variable.
    fn image(&self, v: &str, binders: &[(String, String)]) -> Option<String> {
        if let Some((_, t)) = binders.iter().rev().find(|(p, _)| p == v) {
            return Some(t.clone());
        }
        self.asg.terms.get(v).cloned()
    }

    fn target_bound(t: &str, binders: &[(String, String)]) -> bool {
        binders.iter().any(|(_, b)| b == t)
    }

    fn go(&mut self, p: &Formula, t: &Formula, binders: &mut Vec<(String, String)>) -> bool {
        match (p, t) {
            (Formula::Atom(pa), _) if self.schema.meta(&pa.name).is_some() => {
                let meta = self.schema.meta(&pa.name).unwrap();
                if t.sort_of() != meta.sort {
                    return false;
                }
                let imgs: Option<Vec<String>> =
                    pa.args.iter().map(|v| self.image(v, binders)).collect();
                let Some(args) = imgs else {
                    self.deferred.push(Deferred {
                        pattern: p.clone(),
                        target: t.clone(),
                        binders: binders.clone(),
                    });
                    return true;
                };
                if let Some(fam) = self.asg.metas.get(&pa.name) {
                    return fam.apply(&args).alpha_eq(t);
                }
                let distinct: BTreeSet<&String> = args.iter().collect();
                if distinct.len() != args.len() {
                    self.deferred.push(Deferred {
                        pattern: p.clone(),
                        target: t.clone(),
                        binders: binders.clone(),
                    });
                    return true;
                }
                for v in t.free_vars() {
                    if Matcher::target_bound(&v, binders) && !args.contains(&v) {
                        return false;
                    }
                }
                self.asg.metas.insert(
                    pa.name.clone(),
                    Family {
                        params: args,
                        body: t.clone(),
                    },
                );
                true
            }
            (Formula::Atom(pa), Formula::Atom(ta)) => {
                if pa.name != ta.name || pa.sort != ta.sort || pa.args.len() != ta.args.len() {
                    return false;
                }
                for (pv, tv) in pa.args.iter().zip(&ta.args) {
                    match self.image(pv, binders) {
                        Some(img) => {
                            if img != *tv {
                                return false;
                            }
                        }
                        None => {
                            if Matcher::target_bound(tv, binders) {
                                return false;
                            }
                            self.asg.terms.insert(pv.clone(), tv.clone());
                        }
                    }
                }
                true
            }
            (Formula::True, Formula::True)
            | (Formula::False, Formula::False)
            | (Formula::Bot, Formula::Bot) => true,
            (Formula::And(a, b), Formula::And(c, d))
            | (Formula::Or(a, b), Formula::Or(c, d))
            | (Formula::Imp(a, b), Formula::Imp(c, d)) => {
                self.go(a, c, binders) && self.go(b, d, binders)
            }
            (Formula::Bang(a), Formula::Bang(c)) | (Formula::Quest(a), Formula::Quest(c)) => {
                self.go(a, c, binders)
            }
            (Formula::Forall(u, a), Formula::Forall(v, c))
            | (Formula::Exists(u, a), Formula::Exists(v, c)) => {
                binders.push((u.clone(), v.clone()));
                let ok = self.go(a, c, binders);
                binders.pop();
                ok
            }
            _ => false,
        }
    }

    /// Settles deferred metavariable occurrences by trying candidate images
    /// for the unassigned term variables.
    fn resolve(&mut self, deferred: &[Deferred], k: usize) -> Option<Assignment> {
        let Some(d) = deferred.get(k) else {
            return Some(self.asg.clone());
        };
        let Formula::Atom(pa) = &d.pattern else {
            return None;
        };
        let open: Vec<String> = pa
            .args
            .iter()
            .filter(|v| self.image(v, &d.binders).is_none())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if open.is_empty() {
            let saved = self.asg.clone();
            if self.go(&d.pattern, &d.target, &mut d.binders.clone()) && self.deferred.is_empty() {
                if let Some(r) = self.resolve(deferred, k + 1) {
                    return Some(r);
                }
            }
            self.deferred.clear();
            self.asg = saved;
            return None;
        }
        let mut candidates: Vec<String> = d
            .target
            .free_vars()
            .into_iter()
            .filter(|v| !Matcher::target_bound(v, &d.binders))
            .collect();
        for v in &open {
            if !candidates.contains(v) {
                candidates.push(v.clone());
            }
        }
        let var = &open[0];
        for c in candidates {
            let saved = self.asg.clone();
            self.asg.terms.insert(var.clone(), c);
            if let Some(r) = self.resolve(deferred, k) {
                return Some(r);
            }
            self.asg = saved;
        }
        None
    }
}
