//! Euler–Tarski and Tarski–Kolmogorov models: formulas evaluate to subsets
//! of a finite Alexandrov space, with quantifiers ranging over a finite domain.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{Formula, Sort};
use crate::topology::{FiniteSpace, PointSet, SpaceError, SpaceSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelClass {
    /// Problems are opens, propositions arbitrary subsets.
    #[serde(rename = "et")]
    EulerTarski,
    /// Problems are opens, propositions regular opens.
    #[serde(rename = "tk")]
    TarskiKolmogorov,
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelClass::EulerTarski => "et",
            ModelClass::TarskiKolmogorov => "tk",
        })
    }
}

impl std::str::FromStr for ModelClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "et" => Ok(ModelClass::EulerTarski),
            "tk" => Ok(ModelClass::TarskiKolmogorov),
            _ => Err(format!("unknown model class `{s}` (expected et or tk)")),
        }
    }
}

/// Values of one atom on all tuples over the domain, indexed in mixed radix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtomTable {
    pub arity: usize,
    pub values: Vec<PointSet>,
}

impl AtomTable {
    pub fn new(arity: usize, domain: usize) -> AtomTable {
        AtomTable {
            arity,
            values: vec![PointSet::EMPTY; domain.pow(arity as u32)],
        }
    }

    pub fn constant(value: PointSet) -> AtomTable {
        AtomTable {
            arity: 0,
            values: vec![value],
        }
    }

    pub fn index(tuple: &[usize], domain: usize) -> usize {
        tuple.iter().fold(0, |acc, &d| acc * domain + d)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("atom `{0}` has no valuation in this model")]
    UnknownAtom(String),
    #[error("atom `{name}` is interpreted as a {model} but used as a {used}")]
    SortMismatch { name: String, model: Sort, used: Sort },
    #[error("atom `{name}` has arity {model} in the model but is used with {used} arguments")]
    Arity { name: String, model: usize, used: usize },
    #[error("formula is not sort-correct: {0}")]
    IllSorted(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("problem atom `{atom}` at ({tuple}) has non-open value {value:?}")]
    NotOpen {
        atom: String,
        tuple: String,
        value: Vec<String>,
    },
    #[error("proposition atom `{atom}` at ({tuple}) has value {value:?}, which is not regular open")]
    NotRegular {
        atom: String,
        tuple: String,
        value: Vec<String>,
    },
    #[error("atom `{atom}`: unknown domain element `{element}`")]
    UnknownElement { atom: String, element: String },
    #[error("atom `{atom}`: tuple `{tuple}` has the wrong length (expected {expected})")]
    TupleLength {
        atom: String,
        tuple: String,
        expected: usize,
    },
    #[error("atom `{0}` is declared both as a problem and as a proposition")]
    Duplicate(String),
    #[error("the domain must be nonempty")]
    EmptyDomain,
    #[error("invalid model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// A set model. Validity of a closed formula means it evaluates to the whole space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetModel {
    pub space: Arc<FiniteSpace>,
    pub domain: Vec<String>,
    pub class: ModelClass,
    pub problems: BTreeMap<String, AtomTable>,
    pub propositions: BTreeMap<String, AtomTable>,
}

type AtomMapJson = BTreeMap<String, BTreeMap<String, Vec<String>>>;

#[derive(Serialize, Deserialize)]
struct ModelJson {
    points: Vec<String>,
    #[serde(default)]
    le: Vec<(String, String)>,
    domain: Vec<String>,
    class: ModelClass,
    #[serde(default)]
    prob_atoms: AtomMapJson,
    #[serde(default)]
    prop_atoms: AtomMapJson,
}

impl SetModel {
    pub fn new(space: Arc<FiniteSpace>, domain_size: usize, class: ModelClass) -> SetModel {
        SetModel {
            space,
            domain: (0..domain_size).map(|i| format!("d{i}")).collect(),
            class,
            problems: BTreeMap::new(),
            propositions: BTreeMap::new(),
        }
    }

    pub fn with_problem(mut self, name: &str, value: PointSet) -> SetModel {
        self.problems.insert(name.to_string(), AtomTable::constant(value));
        self
    }

    pub fn with_proposition(mut self, name: &str, value: PointSet) -> SetModel {
        self.propositions
            .insert(name.to_string(), AtomTable::constant(value));
        self
    }

    pub fn full(&self) -> PointSet {
        self.space.full()
    }

    /// Checks the per-class constraints on atom values.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.domain.is_empty() {
            return Err(ModelError::EmptyDomain);
        }
        for name in self.problems.keys() {
            if self.propositions.contains_key(name) {
                return Err(ModelError::Duplicate(name.clone()));
            }
        }
        for (name, t) in &self.problems {
            for (i, v) in t.values.iter().enumerate() {
                if !self.space.is_open(*v) {
                    return Err(ModelError::NotOpen {
                        atom: name.clone(),
                        tuple: self.tuple_key(i, t.arity),
                        value: self.space.set_names(*v),
                    });
                }
            }
        }
        if self.class == ModelClass::TarskiKolmogorov {
            for (name, t) in &self.propositions {
                for (i, v) in t.values.iter().enumerate() {
                    if !self.space.is_regular_open(*v) {
                        return Err(ModelError::NotRegular {
                            atom: name.clone(),
                            tuple: self.tuple_key(i, t.arity),
                            value: self.space.set_names(*v),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn tuple_key(&self, mut index: usize, arity: usize) -> String {
        let n = self.domain.len();
        let mut parts = vec![String::new(); arity];
        for k in (0..arity).rev() {
            parts[k] = self.domain[index % n].clone();
            index /= n;
        }
        parts.join(",")
    }

    pub fn from_json(text: &str) -> Result<SetModel, ModelError> {
        let j: ModelJson = serde_json::from_str(text)?;
        let space = FiniteSpace::from_spec(&SpaceSpec {
            points: j.points,
            le: j.le,
        })?;
        if j.domain.is_empty() {
            return Err(ModelError::EmptyDomain);
        }
        let mut m = SetModel {
            space: Arc::new(space),
            domain: j.domain,
            class: j.class,
            problems: BTreeMap::new(),
            propositions: BTreeMap::new(),
        };
        m.problems = m.tables_from_json(&j.prob_atoms)?;
        m.propositions = m.tables_from_json(&j.prop_atoms)?;
        m.validate()?;
        Ok(m)
    }

    fn tables_from_json(&self, atoms: &AtomMapJson) -> Result<BTreeMap<String, AtomTable>, ModelError> {
        let mut out = BTreeMap::new();
        for (name, entries) in atoms {
            let arity = entries
                .keys()
                .next()
                .map(|k| if k.is_empty() { 0 } else { k.split(',').count() })
                .unwrap_or(0);
            let mut table = AtomTable::new(arity, self.domain.len());
            for (key, points) in entries {
                let parts: Vec<&str> = if key.is_empty() {
                    Vec::new()
                } else {
                    key.split(',').map(str::trim).collect()
                };
                if parts.len() != arity {
                    return Err(ModelError::TupleLength {
                        atom: name.clone(),
                        tuple: key.clone(),
                        expected: arity,
                    });
                }
                let mut tuple = Vec::with_capacity(arity);
                for p in parts {
                    let d = self.domain.iter().position(|e| e == p).ok_or_else(|| {
                        ModelError::UnknownElement {
                            atom: name.clone(),
                            element: p.to_string(),
                        }
                    })?;
                    tuple.push(d);
                }
                let names: Vec<&str> = points.iter().map(String::as_str).collect();
                let set = self.space.set_of(&names)?;
                table.values[AtomTable::index(&tuple, self.domain.len())] = set;
            }
            out.insert(name.clone(), table);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let spec = self.space.to_spec();
        let dump = |tables: &BTreeMap<String, AtomTable>| -> AtomMapJson {
            tables
                .iter()
                .map(|(name, t)| {
                    let entries = t
                        .values
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| !v.is_empty() || t.arity == 0)
                        .map(|(i, v)| (self.tuple_key(i, t.arity), self.space.set_names(*v)))
                        .collect();
                    (name.clone(), entries)
                })
                .collect()
        };
        serde_json::to_value(ModelJson {
            points: spec.points,
            le: spec.le,
            domain: self.domain.clone(),
            class: self.class,
            prob_atoms: dump(&self.problems),
            prop_atoms: dump(&self.propositions),
        })
        .expect("model serializes")
    }

    fn lookup(&self, name: &str, sort: Sort, args: &[String], env: &Env) -> Result<PointSet, EvalError> {
        let (mine, other) = match sort {
            Sort::Problem => (&self.problems, &self.propositions),
            Sort::Proposition => (&self.propositions, &self.problems),
        };
        let table = match mine.get(name) {
            Some(t) => t,
            None if other.contains_key(name) => {
                return Err(EvalError::SortMismatch {
                    name: name.to_string(),
                    model: match sort {
                        Sort::Problem => Sort::Proposition,
                        Sort::Proposition => Sort::Problem,
                    },
                    used: sort,
                })
            }
            None => return Err(EvalError::UnknownAtom(name.to_string())),
        };
        if table.arity != args.len() {
            return Err(EvalError::Arity {
                name: name.to_string(),
                model: table.arity,
                used: args.len(),
            });
        }
        let n = self.domain.len();
        let mut idx = 0;
        for a in args {
            idx = idx * n + env.get(a)?;
        }
        Ok(table.values[idx])
    }

    /// Evaluates `f` under an assignment of its free variables to domain indices.
    pub fn eval(&self, f: &Formula, env: &BTreeMap<String, usize>) -> Result<PointSet, EvalError> {
        let mut e = Env(env.iter().map(|(k, v)| (k.clone(), *v)).collect());
        self.eval_in(f, &mut e)
    }

    /// Evaluates a closed formula.
    pub fn eval_closed(&self, f: &Formula) -> Result<PointSet, EvalError> {
        self.eval_in(f, &mut Env(Vec::new()))
    }

    fn eval_in(&self, f: &Formula, env: &mut Env) -> Result<PointSet, EvalError> {
        let sp = &*self.space;
        let tk = self.class == ModelClass::TarskiKolmogorov;
        Ok(match f {
            Formula::Atom(a) => self.lookup(&a.name, a.sort, &a.args, env)?,
            Formula::True => sp.full(),
            Formula::False | Formula::Bot => PointSet::EMPTY,
            Formula::And(l, r) => self.eval_in(l, env)? & self.eval_in(r, env)?,
            Formula::Or(l, r) => {
                let u = self.eval_in(l, env)? | self.eval_in(r, env)?;
                if tk && l.sort_of() == Sort::Proposition {
                    sp.interior(sp.closure(u))
                } else {
                    u
                }
            }
            Formula::Imp(l, r) => {
                let u = sp.complement(self.eval_in(l, env)?) | self.eval_in(r, env)?;
                if l.sort_of() == Sort::Problem || tk {
                    sp.interior(u)
                } else {
                    u
                }
            }
            Formula::Forall(v, b) => {
                let mut acc = sp.full();
                for d in 0..self.domain.len() {
                    env.0.push((v.clone(), d));
                    let r = self.eval_in(b, env);
                    env.0.pop();
                    acc = acc & r?;
                }
                if b.sort_of() == Sort::Problem || tk {
                    sp.interior(acc)
                } else {
                    acc
                }
            }
            Formula::Exists(v, b) => {
                let mut acc = PointSet::EMPTY;
                for d in 0..self.domain.len() {
                    env.0.push((v.clone(), d));
                    let r = self.eval_in(b, env);
                    env.0.pop();
                    acc = acc | r?;
                }
                if tk && b.sort_of() == Sort::Proposition {
                    sp.interior(sp.closure(acc))
                } else {
                    acc
                }
            }
            Formula::Bang(p) => {
                let s = self.eval_in(p, env)?;
                if tk {
                    s
                } else {
                    sp.interior(s)
                }
            }
            Formula::Quest(a) => {
                let s = self.eval_in(a, env)?;
                if tk {
                    sp.interior(sp.closure(s))
                } else {
                    s
                }
            }
        })
    }

    /// True iff `f` evaluates to the whole space under every assignment of its free variables.
    pub fn valid(&self, f: &Formula) -> Result<bool, EvalError> {
        f.check_sorts()
            .map_err(|e| EvalError::IllSorted(e.to_string()))?;
        let full = self.full();
        let vars = f.free_vars();
        let mut ok = true;
        self.for_each_env(&vars, &mut |env| {
            if ok {
                ok = self.eval(f, env)? == full;
            }
            Ok(())
        })?;
        Ok(ok)
    }

    /// Sequent validity: whenever every premise is valid, so is the conclusion.
    pub fn entails(&self, premises: &[Formula], goal: &Formula) -> Result<bool, EvalError> {
        for p in premises {
            if !self.valid(p)? {
                return Ok(true);
            }
        }
        self.valid(goal)
    }

    /// Runs `f` on every assignment of `vars` to domain elements.
    pub fn for_each_env(
        &self,
        vars: &[String],
        f: &mut dyn FnMut(&BTreeMap<String, usize>) -> Result<(), EvalError>,
    ) -> Result<(), EvalError> {
        let n = self.domain.len();
        let total = n.pow(vars.len() as u32);
        for mut code in 0..total {
            let mut env = BTreeMap::new();
            for v in vars.iter().rev() {
                env.insert(v.clone(), code % n);
                code /= n;
            }
            f(&env)?;
        }
        Ok(())
    }
}

struct Env(Vec<(String, usize)>);

impl Env {
    fn get(&self, v: &str) -> Result<usize, EvalError> {
        self.0
            .iter()
            .rev()
            .find(|(k, _)| k == v)
            .map(|(_, d)| *d)
            .ok_or_else(|| EvalError::Unbound(v.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_inferred;
    use crate::topology::named;

    fn model(class: ModelClass) -> SetModel {
        let x = Arc::new(named::i3());
        let p = x.set_of(&["l"]).unwrap();
        SetModel::new(x, 1, class).with_proposition("p", p)
    }

    fn f(s: &str) -> Formula {
        parse_inferred(s).unwrap()
    }

    #[test]
    fn counit_valid_and_bang_of_left_point_empty() {
        let m = model(ModelClass::EulerTarski);
        assert_eq!(m.eval_closed(&f("!p")).unwrap(), PointSet::EMPTY);
        assert!(m.valid(&f("?!p -> p")).unwrap());
        assert!(!m.valid(&f("p")).unwrap());
        assert!(m.valid(&f("tt")).unwrap());
    }

    #[test]
    fn stability_fails_in_et() {
        let m = model(ModelClass::EulerTarski);
        let sp = m.space.clone();
        assert_eq!(m.eval_closed(&f("!~p")).unwrap(), sp.set_of(&["r", "m"]).unwrap());
        assert_eq!(m.eval_closed(&f("~!p")).unwrap(), sp.full());
        assert!(!m.valid(&f("~!p -> !~p")).unwrap());
    }

    #[test]
    fn top_rule_fails_in_tk() {
        let x = Arc::new(named::i3());
        let a = x.set_of(&["l", "m"]).unwrap();
        let m = SetModel::new(x.clone(), 1, ModelClass::TarskiKolmogorov).with_problem("a", a);
        let qa = Formula::quest(Formula::prob("a", &[]));
        assert_eq!(m.eval_closed(&qa).unwrap(), x.full());
        assert!(!m.valid(&Formula::prob("a", &[])).unwrap());
    }

    #[test]
    fn tk_disjunction_regularizes() {
        let x = Arc::new(named::v3());
        let m = SetModel::new(x.clone(), 1, ModelClass::TarskiKolmogorov)
            .with_proposition("p", x.set_of(&["t1"]).unwrap())
            .with_proposition("q", x.set_of(&["t2"]).unwrap());
        assert_eq!(m.eval_closed(&f("p \\/ q")).unwrap(), x.full());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let x = Arc::new(named::i3());
        let m = SetModel::new(x.clone(), 1, ModelClass::EulerTarski)
            .with_problem("a", x.set_of(&["l"]).unwrap());
        assert!(matches!(m.validate(), Err(ModelError::NotOpen { .. })));
        let m = SetModel::new(x.clone(), 1, ModelClass::TarskiKolmogorov)
            .with_proposition("p", x.set_of(&["m"]).unwrap());
        assert!(matches!(m.validate(), Err(ModelError::NotRegular { .. })));
        let m = SetModel::new(x.clone(), 1, ModelClass::EulerTarski)
            .with_proposition("p", x.set_of(&["m"]).unwrap());
        assert!(m.validate().is_ok());
    }

    #[test]
    fn quantifiers_over_domain() {
        let x = Arc::new(named::i3());
        let mut m = SetModel::new(x.clone(), 2, ModelClass::EulerTarski);
        let mut t = AtomTable::new(1, 2);
        t.values[0] = x.set_of(&["l", "m"]).unwrap();
        t.values[1] = x.set_of(&["r", "m"]).unwrap();
        m.problems.insert("a".into(), t);
        assert_eq!(m.eval_closed(&f("forall x. a(x) -> bot")).unwrap(), PointSet::EMPTY);
        let g = Formula::forall("x", Formula::prob("a", &["x"]));
        assert_eq!(m.eval_closed(&g).unwrap(), x.set_of(&["m"]).unwrap());
        let e = Formula::exists("x", Formula::prob("a", &["x"]));
        assert_eq!(m.eval_closed(&e).unwrap(), x.full());
        let open = Formula::prob("a", &["y"]);
        assert!(!m.valid(&open).unwrap());
        assert!(matches!(m.eval_closed(&open), Err(EvalError::Unbound(_))));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"points":["l","m","r"],"le":[["l","m"],["r","m"]],"domain":["u","v"],
            "class":"et","prob_atoms":{"a":{"u":["m"],"v":["l","m"]}},"prop_atoms":{"p":{"":["l"]}}}"#;
        let m = SetModel::from_json(text).unwrap();
        let back = SetModel::from_json(&m.to_json().to_string()).unwrap();
        assert_eq!(m, back);
        let bad = text.replace(r#""v":["l","m"]"#, r#""v":["l"]"#);
        let err = SetModel::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("`a`") && err.contains("(v)"), "{err}");
    }
}
