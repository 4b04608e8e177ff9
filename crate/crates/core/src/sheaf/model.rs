use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Sheaf, SheafError, SheafJson, DEFAULT_HOM_BUDGET};
use crate::set_models::{AtomTable, EvalError};
use crate::syntax::{Formula, Sort};
use crate::topology::{FiniteSpace, PointSet, SpaceError, SpaceSpec};

#[derive(Debug, Error)]
pub enum SheafModelError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("atom `{atom}`: {reason}")]
    Atom { atom: String, reason: String },
    #[error("invalid model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Values of one problem atom on all tuples over the domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SheafTable {
    pub arity: usize,
    pub values: Vec<Sheaf>,
}

/// A sheaf model: problems denote sheaves, propositions arbitrary subsets.
/// A problem is valid when its sheaf has a global section.
#[derive(Clone, Debug)]
pub struct SheafModel {
    pub space: Arc<FiniteSpace>,
    pub domain: Vec<String>,
    pub problems: BTreeMap<String, SheafTable>,
    pub propositions: BTreeMap<String, AtomTable>,
    pub hom_budget: usize,
    memo: Memo,
}

/// Sheaves of closed problem subformulas already computed, `None` where the
/// hom budget ran out. A clone starts empty, and so does a model after
/// `with_problem`/`with_proposition`.
#[derive(Default)]
struct Memo(Mutex<HashMap<Formula, Option<Sheaf>>>);

impl Clone for Memo {
    fn clone(&self) -> Memo {
        Memo::default()
    }
}

impl fmt::Debug for Memo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Memo")
    }
}

impl Memo {
    fn get(&self, f: &Formula) -> Option<Option<Sheaf>> {
        self.0.lock().expect("memo lock").get(f).cloned()
    }

    fn put(&self, f: &Formula, s: Option<Sheaf>) {
        self.0.lock().expect("memo lock").insert(f.clone(), s);
    }

    fn clear(&mut self) {
        self.0.get_mut().expect("memo lock").clear();
    }
}

#[derive(Serialize, Deserialize)]
struct SheafModelJson {
    points: Vec<String>,
    #[serde(default)]
    le: Vec<(String, String)>,
    domain: Vec<String>,
    #[serde(default)]
    class: Option<String>,
    #[serde(default)]
    prob_atoms: BTreeMap<String, BTreeMap<String, SheafJson>>,
    #[serde(default)]
    prop_atoms: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

/// The value of a formula: a sheaf for problems, a set for propositions.
#[derive(Clone, Debug)]
pub enum Value {
    Problem(Sheaf),
    Proposition(PointSet),
}

type Env = Vec<(String, usize)>;

fn lookup_var(env: &Env, v: &str) -> Result<usize, EvalError> {
    env.iter()
        .rev()
        .find(|(k, _)| k == v)
        .map(|(_, d)| *d)
        .ok_or_else(|| EvalError::Unbound(v.to_string()))
}

impl SheafModel {
    pub fn new(space: Arc<FiniteSpace>, domain_size: usize) -> SheafModel {
        SheafModel {
            space,
            domain: (0..domain_size).map(|i| format!("d{i}")).collect(),
            problems: BTreeMap::new(),
            propositions: BTreeMap::new(),
            hom_budget: DEFAULT_HOM_BUDGET,
            memo: Memo::default(),
        }
    }

    pub fn with_problem(mut self, name: &str, value: Sheaf) -> SheafModel {
        self.memo.clear();
        self.problems.insert(
            name.to_string(),
            SheafTable {
                arity: 0,
                values: vec![value],
            },
        );
        self
    }

    pub fn with_proposition(mut self, name: &str, value: PointSet) -> SheafModel {
        self.memo.clear();
        self.propositions
            .insert(name.to_string(), AtomTable::constant(value));
        self
    }

    fn index(&self, name: &str, arity: usize, args: &[String], env: &Env) -> Result<usize, EvalError> {
        if arity != args.len() {
            return Err(EvalError::Arity {
                name: name.to_string(),
                model: arity,
                used: args.len(),
            });
        }
        let n = self.domain.len();
        let mut idx = 0;
        for a in args {
            idx = idx * n + lookup_var(env, a)?;
        }
        Ok(idx)
    }

    fn atom_missing(&self, name: &str, used: Sort) -> EvalError {
        let other = match used {
            Sort::Problem => self.propositions.contains_key(name),
            Sort::Proposition => self.problems.contains_key(name),
        };
        if other {
            EvalError::SortMismatch {
                name: name.to_string(),
                model: match used {
                    Sort::Problem => Sort::Proposition,
                    Sort::Proposition => Sort::Problem,
                },
                used,
            }
        } else {
            EvalError::UnknownAtom(name.to_string())
        }
    }

    fn problem_atom(&self, name: &str, args: &[String], env: &Env) -> Result<&Sheaf, EvalError> {
        let t = self
            .problems
            .get(name)
            .ok_or_else(|| self.atom_missing(name, Sort::Problem))?;
        Ok(&t.values[self.index(name, t.arity, args, env)?])
    }

    fn over_domain<T>(
        &self,
        v: &str,
        env: &mut Env,
        mut f: impl FnMut(&Self, &mut Env) -> Result<T, SheafModelError>,
    ) -> Result<Vec<T>, SheafModelError> {
        let mut out = Vec::with_capacity(self.domain.len());
        for d in 0..self.domain.len() {
            env.push((v.to_string(), d));
            let r = f(self, env);
            env.pop();
            out.push(r?);
        }
        Ok(out)
    }

    /// The sheaf denoted by a problem-sorted formula.
    fn problem(&self, f: &Formula, env: &mut Env) -> Result<Sheaf, SheafModelError> {
        let closed = matches!(f, Formula::Imp(..) | Formula::And(..)) && f.is_closed();
        if !closed {
            return self.compute(f, env);
        }
        let over = || SheafError::Budget {
            what: "Hom stalk",
            limit: self.hom_budget,
        };
        match self.memo.get(f) {
            Some(Some(s)) => return Ok(s),
            Some(None) => return Err(over().into()),
            None => {}
        }
        match self.compute(f, env) {
            Ok(s) => {
                self.memo.put(f, Some(s.clone()));
                Ok(s)
            }
            Err(SheafModelError::Sheaf(e @ SheafError::Budget { .. })) => {
                self.memo.put(f, None);
                Err(e.into())
            }
            Err(e) => Err(e),
        }
    }

    fn compute(&self, f: &Formula, env: &mut Env) -> Result<Sheaf, SheafModelError> {
        let sp = &self.space;
        Ok(match f {
            Formula::Atom(a) => self.problem_atom(&a.name, &a.args, env)?.clone(),
            Formula::Bot => Sheaf::empty(sp),
            Formula::And(l, r) => self.problem(l, env)?.product(&self.problem(r, env)?)?,
            Formula::Or(l, r) => self.problem(l, env)?.coproduct(&self.problem(r, env)?)?,
            Formula::Imp(l, r) => self
                .problem(l, env)?
                .hom(&self.problem(r, env)?, self.hom_budget)?,
            Formula::Forall(v, b) => {
                let parts = self.over_domain(v, env, |m, e| m.problem(b, e))?;
                Sheaf::product_all(sp, &parts)?
            }
            Formula::Exists(v, b) => {
                let parts = self.over_domain(v, env, |m, e| m.problem(b, e))?;
                Sheaf::coproduct_all(sp, &parts)?
            }
            Formula::Bang(p) => {
                let s = self.proposition(p, env)?;
                Sheaf::characteristic(sp, sp.interior(s))?
            }
            Formula::True | Formula::False | Formula::Quest(_) => {
                return Err(EvalError::IllSorted(format!("`{f}` is not a problem")).into())
            }
        })
    }

    /// The set denoted by a proposition-sorted formula.
    fn proposition(&self, f: &Formula, env: &mut Env) -> Result<PointSet, SheafModelError> {
        let sp = &self.space;
        Ok(match f {
            Formula::Atom(a) => {
                let t = self
                    .propositions
                    .get(&a.name)
                    .ok_or_else(|| self.atom_missing(&a.name, Sort::Proposition))?;
                t.values[self.index(&a.name, t.arity, &a.args, env)?]
            }
            Formula::True => sp.full(),
            Formula::False => PointSet::EMPTY,
            Formula::And(l, r) => self.proposition(l, env)? & self.proposition(r, env)?,
            Formula::Or(l, r) => self.proposition(l, env)? | self.proposition(r, env)?,
            Formula::Imp(l, r) => sp.complement(self.proposition(l, env)?) | self.proposition(r, env)?,
            Formula::Forall(v, b) => self
                .over_domain(v, env, |m, e| m.proposition(b, e))?
                .into_iter()
                .fold(sp.full(), |a, s| a & s),
            Formula::Exists(v, b) => self
                .over_domain(v, env, |m, e| m.proposition(b, e))?
                .into_iter()
                .fold(PointSet::EMPTY, |a, s| a | s),
            Formula::Quest(a) => self.support(a, env)?,
            Formula::Bot | Formula::Bang(_) => {
                return Err(EvalError::IllSorted(format!("`{f}` is not a proposition")).into())
            }
        })
    }

    /// Support of the sheaf denoted by a problem, computed without building
    /// `Hom` sheaves where possible.
    fn support(&self, f: &Formula, env: &mut Env) -> Result<PointSet, SheafModelError> {
        let sp = self.space.clone();
        Ok(match f {
            Formula::Atom(a) => self.problem_atom(&a.name, &a.args, env)?.support(),
            Formula::Bot => PointSet::EMPTY,
            Formula::And(l, r) => self.support(l, env)? & self.support(r, env)?,
            Formula::Or(l, r) => self.support(l, env)? | self.support(r, env)?,
            Formula::Forall(v, b) => self
                .over_domain(v, env, |m, e| m.support(b, e))?
                .into_iter()
                .fold(sp.full(), |a, s| a & s),
            Formula::Exists(v, b) => self
                .over_domain(v, env, |m, e| m.support(b, e))?
                .into_iter()
                .fold(PointSet::EMPTY, |a, s| a | s),
            Formula::Bang(p) => sp.interior(self.proposition(p, env)?),
            Formula::Imp(..) => {
                let mut out = PointSet::EMPTY;
                let mut order = sp.linear_extension();
                order.reverse();
                for x in order {
                    let above_ok = sp.up(x).iter().all(|y| y == x || out.contains(y));
                    if above_ok && self.entails(&mut Vec::new(), f, env, sp.up(x))? {
                        out.insert(x);
                    }
                }
                out
            }
            Formula::True | Formula::False | Formula::Quest(_) => {
                return Err(EvalError::IllSorted(format!("`{f}` is not a problem")).into())
            }
        })
    }

    /// Whether there is a morphism from the product of `premises` to the
    /// sheaf of `goal` over the open `u`.
    fn entails(&self, premises: &mut Vec<Sheaf>, goal: &Formula, env: &mut Env, u: PointSet) -> Result<bool, SheafModelError> {
        let sp = self.space.clone();
        let live = premises.iter().fold(u, |acc, p| acc & p.support());
        if live.is_empty() {
            return Ok(true);
        }
        match goal {
            Formula::Imp(a, b) => {
                let s = self.problem(a, env)?;
                premises.push(s);
                let r = self.entails(premises, b, env, u);
                premises.pop();
                r
            }
            Formula::And(a, b) => Ok(self.entails(premises, a, env, u)? && self.entails(premises, b, env, u)?),
            Formula::Forall(v, b) => {
                for d in 0..self.domain.len() {
                    env.push((v.clone(), d));
                    let r = self.entails(premises, b, env, u);
                    env.pop();
                    if !r? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Bang(p) => Ok(live.is_subset(sp.interior(self.proposition(p, env)?))),
            Formula::Bot => Ok(false),
            _ => {
                let g = self.problem(goal, env)?;
                if !live.is_subset(g.support()) {
                    return Ok(false);
                }
                // P × χ_V -> G over U is P -> G over U ∩ V, and P × P -> G iff P -> G.
                let mut u = u;
                let mut rest: Vec<&Sheaf> = Vec::new();
                for p in premises.iter() {
                    if p.stalks().iter().all(|&k| k <= 1) {
                        u = u & p.support();
                    } else if !rest.contains(&p) {
                        rest.push(p);
                    }
                }
                if rest.is_empty() {
                    return Ok(g.has_section(u)?);
                }
                if rest.iter().any(|p| **p == g) {
                    return Ok(true);
                }
                rest.sort_by_key(|p| p.stalks().iter().sum::<usize>());
                for p in &rest {
                    if p.has_morphism(&g, u)? {
                        return Ok(true);
                    }
                }
                if rest.len() == 1 {
                    return Ok(false);
                }
                let p = Sheaf::product_all(&sp, rest)?;
                Ok(p.has_morphism(&g, u)?)
            }
        }
    }

    /// Evaluates a formula under an assignment of its free variables.
    pub fn eval(&self, f: &Formula, env: &BTreeMap<String, usize>) -> Result<Value, SheafModelError> {
        f.check_sorts()
            .map_err(|e| EvalError::IllSorted(e.to_string()))?;
        let mut e: Env = env.iter().map(|(k, v)| (k.clone(), *v)).collect();
        Ok(match f.sort_of() {
            Sort::Problem => Value::Problem(self.problem(f, &mut e)?),
            Sort::Proposition => Value::Proposition(self.proposition(f, &mut e)?),
        })
    }

    /// The set a proposition denotes, or the support of the sheaf a problem denotes.
    pub fn extent(&self, f: &Formula, env: &BTreeMap<String, usize>) -> Result<PointSet, SheafModelError> {
        let mut e: Env = env.iter().map(|(k, v)| (k.clone(), *v)).collect();
        match f.sort_of() {
            Sort::Problem => self.support(f, &mut e),
            Sort::Proposition => self.proposition(f, &mut e),
        }
    }

    /// Validity: a problem's sheaf has a global section, a proposition's set is
    /// the whole space; for open formulas, under every assignment.
    pub fn valid(&self, f: &Formula) -> Result<bool, SheafModelError> {
        f.check_sorts()
            .map_err(|e| EvalError::IllSorted(e.to_string()))?;
        let vars = f.free_vars();
        let n = self.domain.len();
        let full = self.space.full();
        for mut code in 0..n.pow(vars.len() as u32) {
            let mut env: Env = Vec::with_capacity(vars.len());
            for v in vars.iter().rev() {
                env.push((v.clone(), code % n));
                code /= n;
            }
            let ok = match f.sort_of() {
                Sort::Problem => self.entails(&mut Vec::new(), f, &mut env, full)?,
                Sort::Proposition => self.proposition(f, &mut env)? == full,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn entails_sequent(&self, premises: &[Formula], goal: &Formula) -> Result<bool, SheafModelError> {
        for p in premises {
            if !self.valid(p)? {
                return Ok(true);
            }
        }
        self.valid(goal)
    }

    pub fn from_json(text: &str) -> Result<SheafModel, SheafModelError> {
        let j: SheafModelJson = serde_json::from_str(text)?;
        if let Some(c) = &j.class {
            if c != "sheaf" {
                return Err(SheafModelError::Atom {
                    atom: String::new(),
                    reason: format!("class `{c}` is not a sheaf model"),
                });
            }
        }
        let space = Arc::new(FiniteSpace::from_spec(&SpaceSpec {
            points: j.points,
            le: j.le,
        })?);
        if j.domain.is_empty() {
            return Err(EvalError::IllSorted("empty domain".into()).into());
        }
        let mut m = SheafModel::new(space.clone(), j.domain.len());
        m.domain = j.domain;
        for (name, entries) in &j.prob_atoms {
            let arity = arity_of(entries.keys());
            let mut values = vec![Sheaf::empty(&space); m.domain.len().pow(arity as u32)];
            for (key, sj) in entries {
                let idx = m.tuple_index(name, key, arity)?;
                values[idx] = Sheaf::from_json(&space, sj).map_err(|e| SheafModelError::Atom {
                    atom: format!("{name}({key})"),
                    reason: e.to_string(),
                })?;
            }
            m.problems.insert(name.clone(), SheafTable { arity, values });
        }
        for (name, entries) in &j.prop_atoms {
            let arity = arity_of(entries.keys());
            let mut t = AtomTable::new(arity, m.domain.len());
            for (key, pts) in entries {
                let idx = m.tuple_index(name, key, arity)?;
                let names: Vec<&str> = pts.iter().map(String::as_str).collect();
                t.values[idx] = space.set_of(&names)?;
            }
            m.propositions.insert(name.clone(), t);
        }
        Ok(m)
    }

    fn tuple_index(&self, atom: &str, key: &str, arity: usize) -> Result<usize, SheafModelError> {
        let parts: Vec<&str> = if key.is_empty() { Vec::new() } else { key.split(',').map(str::trim).collect() };
        if parts.len() != arity {
            return Err(SheafModelError::Atom {
                atom: atom.to_string(),
                reason: format!("tuple `{key}` should have {arity} components"),
            });
        }
        let mut idx = 0;
        for p in parts {
            let d = self.domain.iter().position(|e| e == p).ok_or_else(|| SheafModelError::Atom {
                atom: atom.to_string(),
                reason: format!("unknown domain element `{p}`"),
            })?;
            idx = idx * self.domain.len() + d;
        }
        Ok(idx)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let spec = self.space.to_spec();
        let n = self.domain.len();
        let key = |mut i: usize, arity: usize| {
            let mut parts = vec![String::new(); arity];
            for k in (0..arity).rev() {
                parts[k] = self.domain[i % n].clone();
                i /= n;
            }
            parts.join(",")
        };
        let prob_atoms = self
            .problems
            .iter()
            .map(|(name, t)| {
                let m = t.values.iter().enumerate().map(|(i, s)| (key(i, t.arity), s.to_json())).collect();
                (name.clone(), m)
            })
            .collect();
        let prop_atoms = self
            .propositions
            .iter()
            .map(|(name, t)| {
                let m = t
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (key(i, t.arity), self.space.set_names(*s)))
                    .collect();
                (name.clone(), m)
            })
            .collect();
        serde_json::to_value(SheafModelJson {
            points: spec.points,
            le: spec.le,
            domain: self.domain.clone(),
            class: Some("sheaf".into()),
            prob_atoms,
            prop_atoms,
        })
        .expect("model serializes")
    }
}

fn arity_of<'a>(mut keys: impl Iterator<Item = &'a String>) -> usize {
    keys.next()
        .map(|k| if k.is_empty() { 0 } else { k.split(',').count() })
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_inferred;
    use crate::topology::named;

    fn branches() -> SheafModel {
        let sp = Arc::new(named::i3());
        let chi = |p: &[&str]| Sheaf::characteristic(&sp, sp.set_of(p).unwrap()).unwrap();
        let f = chi(&["l", "m"]).coproduct(&chi(&["r", "m"])).unwrap();
        SheafModel::new(sp.clone(), 1)
            .with_problem("a", f)
            .with_proposition("p", sp.set_of(&["l"]).unwrap())
    }

    fn prob(s: &str) -> Formula {
        parse_inferred(s).unwrap().map_atoms(&mut |a| {
            let sort = if a.name == "a" || a.name == "b" { Sort::Problem } else { a.sort };
            Formula::atom(&a.name, sort, &a.args.iter().map(String::as_str).collect::<Vec<_>>())
        })
    }

    #[test]
    fn top_rule_refuted() {
        let m = branches();
        assert!(m.valid(&prob("?a")).unwrap());
        assert!(!m.valid(&prob("a")).unwrap());
    }

    #[test]
    fn unit_and_counit_valid() {
        let m = branches();
        assert!(m.valid(&prob("a -> !?a")).unwrap());
        assert!(m.valid(&prob("?!p -> p")).unwrap());
        let Value::Problem(s) = m.eval(&prob("!p"), &BTreeMap::new()).unwrap() else { panic!() };
        assert_eq!(s, Sheaf::empty(&m.space));
    }

    #[test]
    fn entails_agrees_with_materialised_hom() {
        let m = branches();
        for s in ["a -> a", "a -> bot", "(a -> bot) -> bot", "a /\\ a -> a \\/ a", "(a -> a) -> a", "!?a -> a"] {
            let f = prob(s);
            let direct = m.problem(&f, &mut Vec::new()).unwrap().has_global_section();
            assert_eq!(m.valid(&f).unwrap(), direct, "{s}");
            let supp = m.problem(&f, &mut Vec::new()).unwrap().support();
            assert_eq!(m.support(&f, &mut Vec::new()).unwrap(), supp, "{s}");
        }
    }

    #[test]
    fn json_round_trip() {
        let m = branches();
        let back = SheafModel::from_json(&m.to_json().to_string()).unwrap();
        assert_eq!(back.problems, m.problems);
        assert_eq!(back.propositions, m.propositions);
    }
}
