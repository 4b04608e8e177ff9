use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{parse, parse_inferred, Family, Formula, ParseError, Signature, Sort};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedFormula {
    pub name: String,
    pub formula: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MacroDef {
    pub name: String,
    #[serde(default)]
    pub params: Vec<String>,
    pub body: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TheoryJson {
    pub name: String,
    #[serde(default)]
    pub signature: Signature,
    #[serde(default)]
    pub macros: Vec<MacroDef>,
    #[serde(default)]
    pub axioms: Vec<NamedFormula>,
    #[serde(default)]
    pub postulates: Vec<NamedFormula>,
    #[serde(default)]
    pub mixed: Vec<NamedFormula>,
}

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid theory JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("entry `{name}`: {source}")]
    Parse { name: String, source: ParseError },
    #[error("entry `{0}` is not closed")]
    Open(String),
    #[error("axiom `{0}` is not a proposition")]
    NotClassical(String),
    #[error("postulate `{0}` is not a problem")]
    NotProblem(String),
    #[error("duplicate entry name `{0}`")]
    Duplicate(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Axiom,
    Postulate,
    Mixed,
}

#[derive(Clone, Debug)]
pub struct TheoryEntry {
    pub name: String,
    pub kind: EntryKind,
    pub formula: Formula,
}

/// A named collection of closed classical axioms, problem postulates and
/// mixed entries over a signature. Macros are expanded while parsing.
#[derive(Clone, Debug, Default)]
pub struct Theory {
    pub name: String,
    pub signature: Signature,
    pub macros: Vec<(String, Family)>,
    pub entries: Vec<TheoryEntry>,
}

impl Theory {
    pub fn empty() -> Theory {
        Theory::default()
    }

    pub fn with_signature(name: &str, signature: Signature) -> Theory {
        Theory {
            name: name.to_string(),
            signature,
            ..Theory::default()
        }
    }

    /// Declares a macro `name(params) := body`; the body may use earlier macros.
    pub fn define_macro(&mut self, name: &str, params: &[&str], body: &str) -> Result<Sort, ParseError> {
        let body = self.parse(body)?;
        let sort = body.sort_of();
        self.macros.push((
            name.to_string(),
            Family {
                params: params.iter().map(|s| s.to_string()).collect(),
                body,
            },
        ));
        Ok(sort)
    }

    fn parse_signature(&self) -> Signature {
        let mut sig = self.signature.clone();
        for (name, fam) in &self.macros {
            sig.add(name, fam.body.sort_of(), fam.params.len());
        }
        sig
    }

    /// Parses a formula over the theory's signature and expands macros.
    /// A theory without a signature parses with sort inference.
    pub fn parse(&self, text: &str) -> Result<Formula, ParseError> {
        if self.signature.atoms.is_empty() && self.macros.is_empty() {
            return parse_inferred(text);
        }
        let f = parse(text, &self.parse_signature())?;
        Ok(self.expand(&f))
    }

    pub fn expand(&self, f: &Formula) -> Formula {
        let m: BTreeMap<String, Family> = self.macros.iter().cloned().collect();
        crate::syntax::expand_atoms(f, &m)
    }

    pub fn add(&mut self, name: &str, kind: EntryKind, formula: Formula) -> Result<(), TheoryError> {
        if self.entries.iter().any(|e| e.name == name) {
            return Err(TheoryError::Duplicate(name.to_string()));
        }
        if !formula.is_closed() {
            return Err(TheoryError::Open(name.to_string()));
        }
        match kind {
            EntryKind::Axiom if formula.sort_of() != Sort::Proposition => {
                return Err(TheoryError::NotClassical(name.to_string()))
            }
            EntryKind::Postulate if formula.sort_of() != Sort::Problem => {
                return Err(TheoryError::NotProblem(name.to_string()))
            }
            _ => {}
        }
        self.entries.push(TheoryEntry {
            name: name.to_string(),
            kind,
            formula,
        });
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&TheoryEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn from_json(text: &str) -> Result<Theory, TheoryError> {
        let j: TheoryJson = serde_json::from_str(text)?;
        Theory::from_spec(&j)
    }

    pub fn from_spec(j: &TheoryJson) -> Result<Theory, TheoryError> {
        let mut t = Theory::with_signature(&j.name, j.signature.clone());
        for m in &j.macros {
            let params: Vec<&str> = m.params.iter().map(String::as_str).collect();
            t.define_macro(&m.name, &params, &m.body)
                .map_err(|source| TheoryError::Parse {
                    name: m.name.clone(),
                    source,
                })?;
        }
        for (list, kind) in [
            (&j.axioms, EntryKind::Axiom),
            (&j.postulates, EntryKind::Postulate),
            (&j.mixed, EntryKind::Mixed),
        ] {
            for e in list {
                let f = t.parse(&e.formula).map_err(|source| TheoryError::Parse {
                    name: e.name.clone(),
                    source,
                })?;
                t.add(&e.name, kind, f.universal_closure())?;
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn macros_expand_and_entries_close() {
        let text = r#"{"name":"T","signature":{"atoms":[{"name":"cong","sort":"prop","arity":4}]},
            "macros":[{"name":"eq","params":["a","b"],"body":"cong(a,b,a,a)"},
                      {"name":"ne","params":["a","b"],"body":"~eq(a,b)"}],
            "axioms":[{"name":"1","formula":"cong(a,b,b,a)"}],
            "postulates":[{"name":"p","formula":"!ne(a,b) -> !ne(b,a)"}]}"#;
        let t = Theory::from_json(text).unwrap();
        assert_eq!(t.lookup("1").unwrap().formula.to_string(), "forall a. forall b. cong(a,b,b,a)");
        let p = &t.lookup("p").unwrap().formula;
        assert_eq!(p.to_string(), "forall a. forall b. (!~cong(a,b,a,a) -> !~cong(b,a,b,b))");
    }

    #[test]
    fn kinds_are_checked() {
        let mut t = Theory::empty();
        assert!(t.add("x", EntryKind::Axiom, parse_inferred("!p").unwrap()).is_err());
        assert!(t.add("y", EntryKind::Axiom, parse_inferred("q(x)").unwrap()).is_err());
        assert!(t.add("z", EntryKind::Axiom, parse_inferred("p").unwrap()).is_ok());
        assert!(t.add("z", EntryKind::Mixed, parse_inferred("p").unwrap()).is_err());
    }
}
