//! Semantic soundness sweeps: every schema instance and rule application
//! from a generated instance set, checked against every model of a finite
//! corpus.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::schemata;
use crate::model::{Class, Model};
use crate::principles::{values, InstanceGen};
use crate::set_models::{AtomTable, ModelClass, SetModel};
use crate::sheaf::{SheafModel, SheafTable};
use crate::syntax::{Formula, Signature, Sort};
use crate::topology::{enumerate_spaces, SpaceSpec};

#[derive(Clone, Debug)]
pub struct Corpus {
    pub max_points: usize,
    pub domains: Vec<usize>,
    pub max_stalk: usize,
}

impl Default for Corpus {
    fn default() -> Corpus {
        Corpus {
            max_points: 3,
            domains: vec![1, 2],
            max_stalk: 2,
        }
    }
}

/// The atoms every corpus model interprets: one proposition and one problem.
pub fn corpus_signature() -> Signature {
    Signature::new().with("p", Sort::Proposition, 0).with("a", Sort::Problem, 0)
}

impl Corpus {
    /// Every model over a corpus space and domain, with every value of `p`
    /// and `a` the class admits.
    pub fn models(&self, class: Class) -> Vec<Model> {
        let mut out = Vec::new();
        for sp in enumerate_spaces(self.max_points) {
            let vals = values(&sp, class, self.max_stalk);
            let space = vals.space.clone();
            for &d in &self.domains {
                let problems = match class {
                    Class::Sheaf => vals.sheaves.len(),
                    _ => vals.open.len(),
                };
                for &p in &vals.props {
                    for i in 0..problems {
                        out.push(match class {
                            Class::Sheaf => {
                                let mut m = SheafModel::new(Arc::clone(&space), d);
                                m.problems.insert(
                                    "a".into(),
                                    SheafTable {
                                        arity: 0,
                                        values: vec![vals.sheaves[i].clone()],
                                    },
                                );
                                m.propositions.insert("p".into(), AtomTable::constant(p));
                                Model::Sheaf(m)
                            }
                            _ => {
                                let mc = if class == Class::Et {
                                    ModelClass::EulerTarski
                                } else {
                                    ModelClass::TarskiKolmogorov
                                };
                                Model::Set(
                                    SetModel::new(Arc::clone(&space), d, mc)
                                        .with_problem("a", vals.open[i])
                                        .with_proposition("p", p),
                                )
                            }
                        });
                    }
                }
            }
        }
        out
    }
}

/// Closed instances of every axiom schema over the generator's pools.
pub fn schema_instances(gen: &InstanceGen, sig: &Signature) -> Vec<(&'static str, Formula)> {
    let mut out: Vec<(&'static str, Formula)> = Vec::new();
    for s in schemata() {
        let metas: Vec<(&str, Sort, usize)> = s.schema.metas.iter().map(|m| (m.name.as_str(), m.sort, m.arity)).collect();
        let terms = s.schema.term_vars();
        for a in gen.assignments(&metas, sig) {
            let a = terms.iter().fold(a, |a, t| a.term(t, "x"));
            if let Ok(f) = s.schema.instantiate(&a) {
                if !out.iter().any(|(_, g)| *g == f) {
                    out.push((s.name, f));
                }
            }
        }
    }
    out
}

/// A rule application: closed premises and conclusion.
#[derive(Clone, Debug)]
pub struct RuleInstance {
    pub rule: &'static str,
    pub premises: Vec<Formula>,
    pub conclusion: Formula,
}

/// Applications of every inference rule to pool formulas.
pub fn rule_instances(gen: &InstanceGen, sig: &Signature) -> Vec<RuleInstance> {
    let (prob, prop) = gen.pools(sig);
    let close = |f: Formula| f.universal_closure();
    let mut out = Vec::new();
    let mut push = |rule, premises: Vec<Formula>, conclusion: Formula| {
        out.push(RuleInstance {
            rule,
            premises: premises.into_iter().map(close).collect(),
            conclusion: close(conclusion),
        })
    };
    for pool in [&prob, &prop] {
        for a in pool {
            for b in pool {
                push("mp", vec![a.clone(), Formula::imp(a.clone(), b.clone())], b.clone());
                if a.free_var_set().contains("x") {
                    continue;
                }
                push(
                    "forall_intro",
                    vec![Formula::imp(a.clone(), b.clone())],
                    Formula::imp(a.clone(), Formula::forall("x", b.clone())),
                );
                push(
                    "exists_elim",
                    vec![Formula::imp(b.clone(), a.clone())],
                    Formula::imp(Formula::exists("x", b.clone()), a.clone()),
                );
            }
            push("gen", vec![a.clone()], Formula::forall("x", a.clone()));
        }
    }
    for p in &prop {
        push("nec_bang", vec![p.clone()], Formula::bang(p.clone()));
    }
    for a in &prob {
        push("nec_quest", vec![a.clone()], Formula::quest(a.clone()));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub class: Class,
    pub space: SpaceSpec,
    pub domain: usize,
    pub model: serde_json::Value,
    pub rule: &'static str,
    pub formula: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepReport {
    pub models: usize,
    pub instances: usize,
    pub rule_instances: usize,
    pub checks: u64,
    pub violations: Vec<Failure>,
    /// Checks the model could not decide within its resource budget.
    pub undecided: u64,
    pub undecided_samples: Vec<Failure>,
}

impl SweepReport {
    fn merge(mut self, other: SweepReport) -> SweepReport {
        self.models += other.models;
        self.checks += other.checks;
        self.violations.extend(other.violations);
        self.undecided += other.undecided;
        self.undecided_samples.extend(other.undecided_samples);
        self.undecided_samples.truncate(MAX_REPORTED);
        self
    }
}

const MAX_REPORTED: usize = 20;

fn failure(m: &Model, rule: &'static str, f: &Formula) -> Failure {
    Failure {
        class: m.class(),
        space: m.space().to_spec(),
        domain: m.domain_size(),
        model: m.to_json(),
        rule,
        formula: f.to_string(),
    }
}

impl SweepReport {
    fn record(&mut self, m: &Model, rule: &'static str, f: &Formula, verdict: Option<bool>) {
        self.checks += 1;
        match verdict {
            Some(true) => {}
            Some(false) => {
                if self.violations.len() < MAX_REPORTED {
                    self.violations.push(failure(m, rule, f));
                }
            }
            None => {
                self.undecided += 1;
                if self.undecided_samples.len() < MAX_REPORTED {
                    self.undecided_samples.push(failure(m, rule, f));
                }
            }
        }
    }
}

/// `None` when evaluation fails, which for well-sorted closed formulas means
/// a budget was exceeded.
fn valid(m: &Model, f: &Formula) -> Option<bool> {
    m.valid(f).ok()
}

/// Checks every instance and rule application in every model.
pub fn sweep(models: &[Model], instances: &[(&'static str, Formula)], rules: &[RuleInstance]) -> SweepReport {
    let report = models
        .par_iter()
        .map(|m| {
            let mut r = SweepReport {
                models: 1,
                ..SweepReport::default()
            };
            for (name, f) in instances {
                r.record(m, name, f, valid(m, f));
            }
            for ri in rules {
                let mut premises = Some(true);
                for p in &ri.premises {
                    match valid(m, p) {
                        Some(true) => {}
                        other => {
                            premises = other;
                            break;
                        }
                    }
                }
                let verdict = match premises {
                    Some(true) => valid(m, &ri.conclusion),
                    Some(false) => Some(true),
                    None => None,
                };
                r.record(m, ri.rule, &ri.conclusion, verdict);
            }
            r
        })
        .reduce(SweepReport::default, SweepReport::merge);
    SweepReport {
        instances: instances.len(),
        rule_instances: rules.len(),
        ..report
    }
}

/// The sweep over the corpus models of each class.
pub fn soundness_sweep(corpus: &Corpus, gen: &InstanceGen, classes: &[Class]) -> SweepReport {
    let sig = corpus_signature();
    let instances = schema_instances(gen, &sig);
    let rules = rule_instances(gen, &sig);
    let models: Vec<Model> = classes.iter().flat_map(|&c| corpus.models(c)).collect();
    sweep(&models, &instances, &rules)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_sizes() {
        let c = Corpus {
            max_points: 2,
            domains: vec![1],
            max_stalk: 1,
        };
        // spaces: point, discrete pair, chain; opens 2, 4, 3; subsets 2, 4, 4
        assert_eq!(c.models(Class::Et).len(), 2 * 2 + 4 * 4 + 4 * 3);
        // regular opens 2, 4, 2
        assert_eq!(c.models(Class::Tk).len(), 2 * 2 + 4 * 4 + 2 * 3);
    }

    #[test]
    fn instances_are_closed_and_sort_correct() {
        let gen = InstanceGen {
            depth: 1,
            pool_cap: 4,
            max_instances: 1000,
        };
        let inst = schema_instances(&gen, &corpus_signature());
        assert!(inst.iter().any(|(n, _)| *n == "counit"));
        for (n, f) in &inst {
            assert!(f.is_closed(), "{n}: {f}");
            assert!(f.check_sorts().is_ok(), "{n}: {f}");
        }
    }

    #[test]
    fn a_wrong_law_is_caught() {
        let c = Corpus {
            max_points: 2,
            domains: vec![1],
            max_stalk: 1,
        };
        let bp = Formula::bang(Formula::prop("p", &[]));
        let bad = Formula::or(bp.clone(), Formula::not(bp.clone()));
        let good = Formula::imp(bp.clone(), bp);
        let r = sweep(&c.models(Class::Sheaf), &[("bad", bad), ("identity", good)], &[]);
        assert!(!r.violations.is_empty());
        assert!(r.violations.iter().all(|v| v.rule == "bad"));
    }
}
