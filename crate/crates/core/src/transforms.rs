//! Translations from QHC to its classical, intuitionistic and modal shadows,
//! and the model constructions M_∇ and M_◇.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::set_models::{AtomTable, EvalError, ModelClass, SetModel};
use crate::sheaf::SheafModel;
use crate::syntax::{Atom, Formula, Sort};
use crate::topology::PointSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("atomic problem `{0}` is outside the translated fragment")]
    AtomicProblem(String),
}

fn no_atomic_problems(f: &Formula) -> Result<(), TransformError> {
    let mut bad = None;
    f.visit(&mut |g| {
        if let Formula::Atom(a) = g {
            if a.sort == Sort::Problem && bad.is_none() {
                bad = Some(a.name.clone());
            }
        }
    });
    match bad {
        Some(n) => Err(TransformError::AtomicProblem(n)),
        None => Ok(()),
    }
}

/// Erases every `!` and `?`, reading the result classically.
pub fn erase_to_qc(f: &Formula) -> Result<Formula, TransformError> {
    no_atomic_problems(f)?;
    Ok(erase(f))
}

fn erase(f: &Formula) -> Formula {
    match f {
        Formula::Atom(_) | Formula::True | Formula::False => f.clone(),
        Formula::Bot => Formula::False,
        Formula::And(l, r) => Formula::and(erase(l), erase(r)),
        Formula::Or(l, r) => Formula::or(erase(l), erase(r)),
        Formula::Imp(l, r) => Formula::imp(erase(l), erase(r)),
        Formula::Forall(v, b) => Formula::forall(v, erase(b)),
        Formula::Exists(v, b) => Formula::exists(v, erase(b)),
        Formula::Bang(x) | Formula::Quest(x) => erase(x),
    }
}

fn nn(f: Formula) -> Formula {
    Formula::not(Formula::not(f))
}

/// Erases every `!`, replaces each `?` by `~~`, and gives every classical
/// subformula a `~~` prefix; atomic propositions become problem atoms of the
/// same name. The result is problem-sorted.
pub fn retract_to_qh(f: &Formula) -> Formula {
    match f {
        Formula::Atom(a) if a.sort == Sort::Problem => f.clone(),
        Formula::Atom(a) => nn(Formula::Atom(Atom {
            sort: Sort::Problem,
            ..a.clone()
        })),
        Formula::True => nn(Formula::imp(Formula::Bot, Formula::Bot)),
        Formula::False => nn(Formula::Bot),
        Formula::Bot => Formula::Bot,
        Formula::Bang(p) => retract_to_qh(p),
        Formula::Quest(a) => nn(retract_to_qh(a)),
        _ => {
            let core = match f {
                Formula::And(l, r) => Formula::and(retract_to_qh(l), retract_to_qh(r)),
                Formula::Or(l, r) => Formula::or(retract_to_qh(l), retract_to_qh(r)),
                Formula::Imp(l, r) => Formula::imp(retract_to_qh(l), retract_to_qh(r)),
                Formula::Forall(v, b) => Formula::forall(v, retract_to_qh(b)),
                Formula::Exists(v, b) => Formula::exists(v, retract_to_qh(b)),
                _ => unreachable!(),
            };
            if f.sort_of() == Sort::Proposition {
                nn(core)
            } else {
                core
            }
        }
    }
}

/// A single-sorted first-order modal formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Modal {
    Atom(Atom),
    True,
    False,
    And(Box<Modal>, Box<Modal>),
    Or(Box<Modal>, Box<Modal>),
    Imp(Box<Modal>, Box<Modal>),
    Forall(String, Box<Modal>),
    Exists(String, Box<Modal>),
    Box(Box<Modal>),
}

impl Modal {
    pub fn boxed(m: Modal) -> Modal {
        Modal::Box(Box::new(m))
    }

    pub fn not(m: Modal) -> Modal {
        Modal::Imp(Box::new(m), Box::new(Modal::False))
    }

    pub fn dia(m: Modal) -> Modal {
        Modal::not(Modal::boxed(Modal::not(m)))
    }

    fn prec(&self) -> u8 {
        match self {
            Modal::Imp(_, r) if **r == Modal::False => 5,
            Modal::Imp(..) => 2,
            Modal::Or(..) => 3,
            Modal::And(..) => 4,
            Modal::Box(_) | Modal::Forall(..) | Modal::Exists(..) => 5,
            _ => 6,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.prec();
        if p < min {
            write!(f, "(")?;
        }
        match self {
            Modal::Atom(a) => {
                write!(f, "{}", a.name)?;
                if !a.args.is_empty() {
                    write!(f, "({})", a.args.join(","))?;
                }
            }
            Modal::True => write!(f, "tt")?,
            Modal::False => write!(f, "ff")?,
            Modal::Imp(x, r) if **r == Modal::False => {
                write!(f, "~")?;
                x.write(f, 5)?;
            }
            Modal::And(l, r) => {
                l.write(f, 4)?;
                write!(f, " /\\ ")?;
                r.write(f, 5)?;
            }
            Modal::Or(l, r) => {
                l.write(f, 3)?;
                write!(f, " \\/ ")?;
                r.write(f, 4)?;
            }
            Modal::Imp(l, r) => {
                l.write(f, 3)?;
                write!(f, " -> ")?;
                r.write(f, 2)?;
            }
            Modal::Forall(v, b) => {
                write!(f, "forall {v}. ")?;
                b.write(f, 5)?;
            }
            Modal::Exists(v, b) => {
                write!(f, "exists {v}. ")?;
                b.write(f, 5)?;
            }
            Modal::Box(b) => {
                write!(f, "box ")?;
                b.write(f, 5)?;
            }
        }
        if p < min {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Modal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

/// The Gödel–McKinsey–Tarski reading: `!` becomes box, `?` is erased, and
/// problem-sorted implication and universal quantification are boxed.
pub fn box_translate(f: &Formula) -> Result<Modal, TransformError> {
    no_atomic_problems(f)?;
    Ok(boxt(f))
}

fn boxt(f: &Formula) -> Modal {
    let b = |x: &Formula| Box::new(boxt(x));
    match f {
        Formula::Atom(a) => Modal::Atom(a.clone()),
        Formula::True => Modal::True,
        Formula::False | Formula::Bot => Modal::False,
        Formula::And(l, r) => Modal::And(b(l), b(r)),
        Formula::Or(l, r) => Modal::Or(b(l), b(r)),
        Formula::Imp(l, r) => {
            let m = Modal::Imp(b(l), b(r));
            if l.sort_of() == Sort::Problem {
                Modal::boxed(m)
            } else {
                m
            }
        }
        Formula::Forall(v, x) => {
            let m = Modal::Forall(v.clone(), b(x));
            if x.sort_of() == Sort::Problem {
                Modal::boxed(m)
            } else {
                m
            }
        }
        Formula::Exists(v, x) => Modal::Exists(v.clone(), b(x)),
        Formula::Bang(p) => Modal::boxed(boxt(p)),
        Formula::Quest(a) => boxt(a),
    }
}

/// Evaluates a modal formula topologically over the space of `model`, using
/// its proposition atoms: Boolean connectives, box as interior.
pub fn s4_eval(g: &Modal, model: &SetModel, env: &BTreeMap<String, usize>) -> Result<PointSet, EvalError> {
    let mut env = env.clone();
    s4(g, model, &mut env)
}

fn s4(g: &Modal, m: &SetModel, env: &mut BTreeMap<String, usize>) -> Result<PointSet, EvalError> {
    let sp = &*m.space;
    Ok(match g {
        Modal::Atom(a) => {
            let t = m
                .propositions
                .get(&a.name)
                .ok_or_else(|| EvalError::UnknownAtom(a.name.clone()))?;
            if t.arity != a.args.len() {
                return Err(EvalError::Arity {
                    name: a.name.clone(),
                    model: t.arity,
                    used: a.args.len(),
                });
            }
            let mut tuple = Vec::with_capacity(a.args.len());
            for v in &a.args {
                tuple.push(*env.get(v).ok_or_else(|| EvalError::Unbound(v.clone()))?);
            }
            t.values[AtomTable::index(&tuple, m.domain.len())]
        }
        Modal::True => sp.full(),
        Modal::False => PointSet::EMPTY,
        Modal::And(l, r) => s4(l, m, env)? & s4(r, m, env)?,
        Modal::Or(l, r) => s4(l, m, env)? | s4(r, m, env)?,
        Modal::Imp(l, r) => sp.complement(s4(l, m, env)?) | s4(r, m, env)?,
        Modal::Box(x) => sp.interior(s4(x, m, env)?),
        Modal::Forall(v, b) | Modal::Exists(v, b) => {
            let all = matches!(g, Modal::Forall(..));
            let saved = env.get(v).copied();
            let mut acc = if all { sp.full() } else { PointSet::EMPTY };
            for d in 0..m.domain.len() {
                env.insert(v.clone(), d);
                let s = s4(b, m, env);
                let s = match s {
                    Ok(s) => s,
                    Err(e) => {
                        restore(env, v, saved);
                        return Err(e);
                    }
                };
                acc = if all { acc & s } else { acc | s };
            }
            restore(env, v, saved);
            acc
        }
    })
}

fn restore(env: &mut BTreeMap<String, usize>, v: &str, saved: Option<usize>) {
    match saved {
        Some(d) => env.insert(v.to_string(), d),
        None => env.remove(v),
    };
}

/// The Euler–Tarski model M_∇: each atomic problem is replaced by the support
/// of its sheaf; atomic propositions are kept.
pub fn nabla_model(m: &SheafModel) -> SetModel {
    let problems = m
        .problems
        .iter()
        .map(|(k, t)| {
            (
                k.clone(),
                AtomTable {
                    arity: t.arity,
                    values: t.values.iter().map(|s| s.support()).collect(),
                },
            )
        })
        .collect();
    SetModel {
        space: Arc::clone(&m.space),
        domain: m.domain.clone(),
        class: ModelClass::EulerTarski,
        problems,
        propositions: m.propositions.clone(),
    }
}

/// The Tarski–Kolmogorov model M_◇: each atomic proposition S is replaced by
/// `Int Cl Int S`; atomic problems are kept.
pub fn diamond_model(m: &SetModel) -> SetModel {
    let sp = Arc::clone(&m.space);
    let propositions = m
        .propositions
        .iter()
        .map(|(k, t)| {
            (
                k.clone(),
                AtomTable {
                    arity: t.arity,
                    values: t.values.iter().map(|&s| sp.regularize(s)).collect(),
                },
            )
        })
        .collect();
    SetModel {
        space: sp,
        domain: m.domain.clone(),
        class: ModelClass::TarskiKolmogorov,
        problems: m.problems.clone(),
        propositions,
    }
}

/// The Euler–Tarski model that interprets the problem atoms produced by
/// [`retract_to_qh`]: each proposition atom becomes a problem atom with the
/// same (regular open) value.
pub fn retraction_model(m: &SetModel) -> SetModel {
    let mut problems = m.problems.clone();
    for (k, t) in &m.propositions {
        problems.insert(k.clone(), t.clone());
    }
    SetModel {
        space: Arc::clone(&m.space),
        domain: m.domain.clone(),
        class: ModelClass::EulerTarski,
        problems,
        propositions: BTreeMap::new(),
    }
}
