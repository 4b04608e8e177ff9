//! Independence principles of QHC: the catalog with expected statuses,
//! instance checking, countermodel search and the implication check.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{Class, Model};
use crate::set_models::{AtomTable, ModelClass, SetModel};
use crate::sheaf::{enumerate_sheaves, Sheaf, SheafModel, SheafTable};
use crate::syntax::{Assignment, Family, Formula, Schema, Signature, Sort};
use crate::topology::{enumerate_spaces, FiniteSpace, PointSet, SpaceSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Law,
    Rule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expected {
    HoldsInAll,
    FiniteWitness,
    RequiresInfinite,
}

#[derive(Clone, Debug, Serialize)]
pub struct StatusEntry {
    pub class: Class,
    pub expected: Expected,
    /// Why no finite countermodel exists, for `RequiresInfinite` entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finiteness: Option<&'static str>,
}

/// A rule form or law form: a law has no premises.
#[derive(Clone, Debug)]
pub struct Form {
    pub premises: Vec<Schema>,
    pub conclusion: Schema,
}

#[derive(Clone, Debug)]
pub struct Principle {
    pub name: &'static str,
    pub title: &'static str,
    pub kind: Kind,
    pub metas: Vec<(&'static str, Sort, usize)>,
    pub form: Form,
    /// Equivalent formulations.
    pub equivalents: Vec<Form>,
    pub status: Vec<StatusEntry>,
    /// False for entries equivalent to other entries or their conjunctions.
    pub distinct: bool,
}

impl Principle {
    /// The expected status; auxiliary principles have none.
    pub fn status(&self, class: Class) -> Option<&StatusEntry> {
        self.status.iter().find(|s| s.class == class)
    }

    pub fn has_unary_metas(&self) -> bool {
        self.metas.iter().any(|m| m.2 > 0)
    }

    /// The instance with each metavariable replaced by an atom named after it.
    pub fn atomic_instance(&self) -> (Vec<Formula>, Formula) {
        atomic_form(&self.metas, &self.form)
    }
}

fn atom_name(meta: &str) -> String {
    meta.to_lowercase()
}

fn atomic_assignment(metas: &[(&str, Sort, usize)]) -> Assignment {
    let mut a = Assignment::new();
    for &(m, sort, arity) in metas {
        let params: Vec<String> = (0..arity).map(|i| format!("v{i}")).collect();
        let args: Vec<&str> = params.iter().map(String::as_str).collect();
        a = a.set(m, Family::new(&args, Formula::atom(&atom_name(m), sort, &args)));
    }
    a
}

fn atomic_form(metas: &[(&str, Sort, usize)], form: &Form) -> (Vec<Formula>, Formula) {
    let a = atomic_assignment(metas);
    let inst = |s: &Schema| {
        let used: Vec<(&str, Sort, usize)> = metas
            .iter()
            .copied()
            .filter(|m| s.metas.iter().any(|n| n.name == m.0))
            .collect();
        s.instantiate(&restrict(&a, &used)).expect("atomic instance")
    };
    (form.premises.iter().map(inst).collect(), inst(&form.conclusion))
}

fn restrict(a: &Assignment, metas: &[(&str, Sort, usize)]) -> Assignment {
    let mut out = Assignment::new();
    for m in metas {
        out = out.set(m.0, a.metas[m.0].clone());
    }
    out
}

const A: (&str, Sort, usize) = ("A", Sort::Problem, 0);
const B: (&str, Sort, usize) = ("B", Sort::Problem, 0);
const P: (&str, Sort, usize) = ("P", Sort::Proposition, 0);
const Q: (&str, Sort, usize) = ("Q", Sort::Proposition, 0);
const A1: (&str, Sort, usize) = ("A", Sort::Problem, 1);
const P1: (&str, Sort, usize) = ("P", Sort::Proposition, 1);

const ET_FORALL_STAR: &str = "both sides denote the intersection of the finitely many open sets |A(d)|, and a finite intersection of open sets is open, so the interior on the right changes nothing";
const SHEAF_FORALL_STAR: &str = "the support of a finite product of sheaves is the intersection of their supports, which is open, so both sides denote the same set";
const TK_FORALL: &str = "both sides reduce to Int Cl of the intersection of finitely many open sets, since Int Cl commutes with finite intersections of open sets";
const SHEAF_FORALL: &str = "the support of a finite product of sheaves is the intersection of their open supports, so taking the interior of that intersection changes nothing";

struct Entry {
    name: &'static str,
    title: &'static str,
    metas: &'static [(&'static str, Sort, usize)],
    premises: &'static [&'static str],
    conclusion: &'static str,
    equivalents: &'static [(&'static [&'static str], &'static str)],
    holds: [bool; 3],
    infinite: [Option<&'static str>; 3],
    distinct: bool,
}

const FINITE: [Option<&str>; 3] = [None, None, None];

const ENTRIES: &[Entry] = &[
    Entry {
        name: "top-rule",
        title: "⊤-Rule",
        metas: &[A],
        premises: &["?A"],
        conclusion: "A",
        equivalents: &[(&["nabla A"], "A")],
        holds: [true, false, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "bot-rule",
        title: "⊥-Rule",
        metas: &[P],
        premises: &["~!P"],
        conclusion: "~P",
        equivalents: &[(&["dia P"], "P")],
        holds: [false, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "quest",
        title: "?-Principle",
        metas: &[A, B],
        premises: &[],
        conclusion: "?(A -> B) <-> box (?A -> ?B)",
        equivalents: &[
            (&[], "!?(A -> B) <-> !(?A -> ?B)"),
            (&[], "?(A -> B) <-> ?(nabla A -> nabla B)"),
            (&[], "nabla (A -> B) <-> (nabla A -> nabla B)"),
        ],
        holds: [true, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "forall",
        title: "∀-Principle",
        metas: &[A1],
        premises: &[],
        conclusion: "?(forall x. A(x)) <-> box forall x. ?A(x)",
        equivalents: &[
            (&[], "!?(forall x. A(x)) <-> !forall x. ?A(x)"),
            (&[], "?(forall x. A(x)) <-> ?forall x. nabla A(x)"),
            (&[], "nabla (forall x. A(x)) <-> forall x. nabla A(x)"),
        ],
        holds: [true, false, false],
        distinct: true,
        infinite: [None, Some(TK_FORALL), Some(SHEAF_FORALL)],
    },
    Entry {
        name: "or",
        title: "∨-Principle",
        metas: &[P, Q],
        premises: &[],
        conclusion: "!(P \\/ Q) <-> nabla (!P \\/ !Q)",
        equivalents: &[
            (&[], "?!(P \\/ Q) <-> ?(!P \\/ !Q)"),
            (&[], "!(P \\/ Q) <-> !(box P \\/ box Q)"),
            (&[], "box (P \\/ Q) <-> box P \\/ box Q"),
        ],
        holds: [false, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "exists",
        title: "∃-Principle",
        metas: &[P1],
        premises: &[],
        conclusion: "!(exists x. P(x)) <-> nabla exists x. !P(x)",
        equivalents: &[
            (&[], "?!(exists x. P(x)) <-> ?exists x. !P(x)"),
            (&[], "!(exists x. P(x)) <-> !exists x. box P(x)"),
            (&[], "box (exists x. P(x)) <-> exists x. box P(x)"),
        ],
        holds: [false, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "bang",
        title: "!-Principle",
        metas: &[P, Q],
        premises: &[],
        conclusion: "!(P -> Q) <-> nabla (!P -> !Q)",
        equivalents: &[
            (&[], "?!(P -> Q) <-> ?(!P -> !Q)"),
            (&[], "!(P -> Q) <-> !(box P -> box Q)"),
            (&[], "box (P -> Q) <-> (box P -> box Q)"),
            (&[], "!(P -> Q) <-> (!P -> !Q)"),
            (&[], "box P <-> P"),
            (&["~!P"], "~P"),
        ],
        holds: [false, true, false],
        distinct: false,
        infinite: FINITE,
    },
    Entry {
        name: "quest-star",
        title: "?*-Principle",
        metas: &[A, B],
        premises: &[],
        conclusion: "(?A -> ?B) <-> ?(nabla A -> nabla B)",
        equivalents: &[(&[], "(?A -> ?B) <-> box (?A -> ?B)")],
        holds: [false, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "forall-star",
        title: "∀*-Principle",
        metas: &[A1],
        premises: &[],
        conclusion: "(forall x. ?A(x)) <-> ?forall x. nabla A(x)",
        equivalents: &[(&[], "(forall x. ?A(x)) <-> box forall x. ?A(x)")],
        holds: [false, true, false],
        distinct: true,
        infinite: [Some(ET_FORALL_STAR), None, Some(SHEAF_FORALL_STAR)],
    },
    Entry {
        name: "or-star",
        title: "∨*-Principle",
        metas: &[P, Q],
        premises: &[],
        conclusion: "!P \\/ !Q <-> !(box P \\/ box Q)",
        equivalents: &[(&[], "!P \\/ !Q <-> nabla (!P \\/ !Q)")],
        holds: [true, false, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "exists-star",
        title: "∃*-Principle",
        metas: &[P1],
        premises: &[],
        conclusion: "(exists x. !P(x)) <-> !exists x. box P(x)",
        equivalents: &[(&[], "(exists x. !P(x)) <-> nabla exists x. !P(x)")],
        holds: [true, false, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "stability",
        title: "Kolmogorov's Stability Principle",
        metas: &[P],
        premises: &[],
        conclusion: "!~P <-> ~!P",
        equivalents: &[],
        holds: [false, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "no-ignorabimus",
        title: "Hilbert's No Ignorabimus Principle",
        metas: &[A],
        premises: &[],
        conclusion: "?~A <-> ~?A",
        equivalents: &[],
        holds: [false, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "edr",
        title: "Exclusive Disjunction Rule",
        metas: &[A, B],
        premises: &["~(A /\\ B)"],
        conclusion: "nabla (A \\/ B) <-> nabla A \\/ nabla B",
        equivalents: &[],
        holds: [true, false, true],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "expr-1",
        title: "expressive principle (1)",
        metas: &[P, Q],
        premises: &[],
        conclusion: "(P -> Q) <-> ?(!P -> !Q)",
        equivalents: &[],
        holds: [false, true, false],
        distinct: false,
        infinite: FINITE,
    },
    Entry {
        name: "expr-2",
        title: "expressive principle (2)",
        metas: &[P, Q],
        premises: &[],
        conclusion: "P \\/ Q <-> ?(!P \\/ !Q)",
        equivalents: &[],
        holds: [false, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "expr-3",
        title: "expressive principle (3)",
        metas: &[P1],
        premises: &[],
        conclusion: "(exists x. P(x)) <-> ?exists x. !P(x)",
        equivalents: &[],
        holds: [false, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "expr-4",
        title: "expressive principle (4)",
        metas: &[P1],
        premises: &[],
        conclusion: "(forall x. P(x)) <-> ?forall x. !P(x)",
        equivalents: &[],
        holds: [false, true, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "expr-1'",
        title: "expressive principle (1')",
        metas: &[A, B],
        premises: &[],
        conclusion: "(A -> B) <-> !(?A -> ?B)",
        equivalents: &[(&[], "(A -> B) <-> (nabla A -> nabla B)")],
        holds: [true, false, false],
        distinct: false,
        infinite: FINITE,
    },
    Entry {
        name: "expr-2'",
        title: "expressive principle (2')",
        metas: &[A, B],
        premises: &[],
        conclusion: "A \\/ B <-> !(?A \\/ ?B)",
        equivalents: &[],
        holds: [true, false, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "expr-3'",
        title: "expressive principle (3')",
        metas: &[A1],
        premises: &[],
        conclusion: "(exists x. A(x)) <-> !exists x. ?A(x)",
        equivalents: &[],
        holds: [true, false, false],
        distinct: true,
        infinite: FINITE,
    },
    Entry {
        name: "expr-4'",
        title: "expressive principle (4')",
        metas: &[A1],
        premises: &[],
        conclusion: "(forall x. A(x)) <-> !forall x. ?A(x)",
        equivalents: &[],
        holds: [true, false, false],
        distinct: true,
        infinite: FINITE,
    },
];

fn parse_form(name: &str, metas: &[(&str, Sort, usize)], premises: &[&str], conclusion: &str) -> Form {
    let schema = |text: &str| {
        let used: Vec<(&str, Sort, usize)> = metas
            .iter()
            .copied()
            .filter(|m| text.contains(m.0))
            .collect();
        Schema::parse(name, text, &used).unwrap_or_else(|e| panic!("{name}: {e}"))
    };
    Form {
        premises: premises.iter().map(|p| schema(p)).collect(),
        conclusion: schema(conclusion),
    }
}

fn build_catalog() -> Vec<Principle> {
    ENTRIES
        .iter()
        .map(|e| {
            let status = Class::ALL
                .iter()
                .enumerate()
                .map(|(i, &class)| StatusEntry {
                    class,
                    expected: match (e.holds[i], e.infinite[i]) {
                        (true, _) => Expected::HoldsInAll,
                        (false, Some(_)) => Expected::RequiresInfinite,
                        (false, None) => Expected::FiniteWitness,
                    },
                    finiteness: e.infinite[i],
                })
                .collect();
            Principle {
                name: e.name,
                title: e.title,
                kind: if e.premises.is_empty() { Kind::Law } else { Kind::Rule },
                metas: e.metas.to_vec(),
                form: parse_form(e.name, e.metas, e.premises, e.conclusion),
                equivalents: e
                    .equivalents
                    .iter()
                    .map(|(ps, c)| parse_form(e.name, e.metas, ps, c))
                    .collect(),
                status,
                distinct: e.distinct,
            }
        })
        .collect()
}

/// Adopted definitions that appear in proven implications but carry no
/// status of their own.
const AUXILIARY: &[(&str, &str, &[(&str, Sort, usize)], &str)] = &[
    ("semi-decidability", "semi-decidability of propositions", &[P], "?(!P \\/ !~P)"),
    ("decidability", "Principle of Decidability", &[A], "A \\/ ~A"),
    ("weak-decidability", "weak decidability", &[A], "~A \\/ ~~A"),
    ("nn-shift", "¬¬-Shift Principle", &[A1], "(forall x. ~~A(x)) -> ~~forall x. A(x)"),
    ("strong-markov", "Strong Markov Principle", &[A1], "~~(exists x. A(x)) -> exists x. ~~A(x)"),
];

pub fn auxiliary() -> &'static [Principle] {
    static AUX: OnceLock<Vec<Principle>> = OnceLock::new();
    AUX.get_or_init(|| {
        AUXILIARY
            .iter()
            .map(|&(name, title, metas, text)| Principle {
                name,
                title,
                kind: Kind::Law,
                metas: metas.to_vec(),
                form: parse_form(name, metas, &[], text),
                equivalents: vec![],
                status: vec![],
                distinct: false,
            })
            .collect()
    })
}

/// Every principle of the catalog.
pub fn catalog() -> &'static [Principle] {
    static CATALOG: OnceLock<Vec<Principle>> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

/// A catalog entry or auxiliary principle by name.
pub fn lookup(name: &str) -> Option<&'static Principle> {
    catalog().iter().chain(auxiliary()).find(|p| p.name == name)
}

/// Proven implications between principles: all of `premises` together imply
/// `consequence`.
pub const IMPLICATIONS: &[(&[&str], &str)] = &[
    (&["bang"], "stability"),
    (&["quest-star"], "no-ignorabimus"),
    (&["or"], "stability"),
    (&["or-star"], "edr"),
    (&["quest-star"], "quest"),
    (&["bang"], "quest-star"),
    (&["bang"], "bot-rule"),
    (&["bot-rule"], "bang"),
    (&["bang"], "expr-1"),
    (&["expr-1"], "bang"),
    (&["bang"], "expr-2"),
    (&["bang"], "expr-3"),
    (&["bang"], "expr-4"),
    (&["bang"], "or"),
    (&["bang"], "exists"),
    (&["bang"], "forall-star"),
    (&["quest", "top-rule"], "expr-1'"),
    (&["expr-1'"], "quest"),
    (&["expr-1'"], "top-rule"),
    (&["quest", "top-rule"], "expr-2'"),
    (&["quest", "top-rule"], "expr-3'"),
    (&["quest", "top-rule"], "expr-4'"),
    (&["quest", "top-rule"], "or-star"),
    (&["quest", "top-rule"], "exists-star"),
    (&["quest", "top-rule"], "forall"),
    (&["expr-1"], "quest-star"),
    (&["expr-2"], "or"),
    (&["expr-3"], "exists"),
    (&["expr-4"], "forall-star"),
    (&["expr-1'"], "quest"),
    (&["expr-2'"], "or-star"),
    (&["expr-3'"], "exists-star"),
    (&["expr-4'"], "forall"),
    (&["or"], "semi-decidability"),
    (&["semi-decidability"], "stability"),
    (&["no-ignorabimus"], "quest"),
    (&["no-ignorabimus", "top-rule"], "decidability"),
    (&["no-ignorabimus", "decidability"], "top-rule"),
    (&["no-ignorabimus", "forall"], "nn-shift"),
    (&["no-ignorabimus", "nn-shift"], "forall"),
    (&["no-ignorabimus", "exists-star"], "strong-markov"),
    (&["no-ignorabimus", "strong-markov"], "exists-star"),
    (&["no-ignorabimus", "edr"], "weak-decidability"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bounds {
    pub max_points: usize,
    pub max_domain: usize,
    pub max_stalk: usize,
}

impl Default for Bounds {
    fn default() -> Bounds {
        Bounds {
            max_points: 4,
            max_domain: 2,
            max_stalk: 2,
        }
    }
}

/// The semantic values a metavariable can take on a space.
#[derive(Clone, Debug)]
pub struct Values {
    pub space: Arc<FiniteSpace>,
    pub open: Vec<PointSet>,
    pub props: Vec<PointSet>,
    pub sheaves: Arc<Vec<Sheaf>>,
}

impl Values {
    fn problems(&self, class: Class) -> usize {
        match class {
            Class::Sheaf => self.sheaves.len(),
            _ => self.open.len(),
        }
    }
}

fn sheaf_cache(space: &FiniteSpace, k: usize) -> (Arc<FiniteSpace>, Arc<Vec<Sheaf>>) {
    type Cache = Mutex<HashMap<(String, usize), (Arc<FiniteSpace>, Arc<Vec<Sheaf>>)>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let key = (serde_json::to_string(&space.to_spec()).expect("spec serializes"), k);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache lock").get(&key) {
        return v.clone();
    }
    let sp = Arc::new(space.clone());
    let v = (sp.clone(), Arc::new(enumerate_sheaves(&sp, k)));
    cache.lock().expect("cache lock").insert(key, v.clone());
    v
}

/// Values on `space` for the given class; sheaves have stalks of size at
/// most `max_stalk`, one per isomorphism class.
pub fn values(space: &FiniteSpace, class: Class, max_stalk: usize) -> Values {
    let (sp, sheaves) = if class == Class::Sheaf {
        sheaf_cache(space, max_stalk)
    } else {
        (Arc::new(space.clone()), Arc::new(Vec::new()))
    };
    let props = match class {
        Class::Tk => sp.regular_opens(),
        _ => sp.all_subsets().collect(),
    };
    Values {
        open: sp.opens(),
        props,
        sheaves,
        space: sp,
    }
}

fn slots(metas: &[(&str, Sort, usize)], domain: usize) -> Vec<(usize, usize)> {
    // (meta index, tuple index) in enumeration order, last slot fastest.
    let mut out = Vec::new();
    for (i, m) in metas.iter().enumerate() {
        for t in 0..domain.pow(m.2 as u32) {
            out.push((i, t));
        }
    }
    out
}

/// The model in which each metavariable atom takes the values selected by
/// `code` (mixed radix over the slots).
fn model_for(
    metas: &[(&str, Sort, usize)],
    class: Class,
    vals: &Values,
    domain: usize,
    mut code: u64,
) -> Model {
    let sl = slots(metas, domain);
    let mut choice = vec![0usize; sl.len()];
    for (k, &(i, _)) in sl.iter().enumerate().rev() {
        let radix = match metas[i].1 {
            Sort::Problem => vals.problems(class),
            Sort::Proposition => vals.props.len(),
        } as u64;
        choice[k] = (code % radix) as usize;
        code /= radix;
    }
    let pick = |i: usize| -> Vec<usize> {
        sl.iter()
            .zip(&choice)
            .filter(|((m, _), _)| *m == i)
            .map(|(_, c)| *c)
            .collect()
    };
    let sp = vals.space.clone();
    match class {
        Class::Sheaf => {
            let mut m = SheafModel::new(sp, domain);
            for (i, &(name, sort, arity)) in metas.iter().enumerate() {
                let c = pick(i);
                match sort {
                    Sort::Problem => {
                        m.problems.insert(
                            atom_name(name),
                            SheafTable {
                                arity,
                                values: c.iter().map(|&j| vals.sheaves[j].clone()).collect(),
                            },
                        );
                    }
                    Sort::Proposition => {
                        m.propositions.insert(
                            atom_name(name),
                            AtomTable {
                                arity,
                                values: c.iter().map(|&j| vals.props[j]).collect(),
                            },
                        );
                    }
                }
            }
            Model::Sheaf(m)
        }
        _ => {
            let mc = if class == Class::Et {
                ModelClass::EulerTarski
            } else {
                ModelClass::TarskiKolmogorov
            };
            let mut m = SetModel::new(sp, domain, mc);
            for (i, &(name, sort, arity)) in metas.iter().enumerate() {
                let c = pick(i);
                let (table, pool) = match sort {
                    Sort::Problem => (&mut m.problems, &vals.open),
                    Sort::Proposition => (&mut m.propositions, &vals.props),
                };
                table.insert(
                    atom_name(name),
                    AtomTable {
                        arity,
                        values: c.iter().map(|&j| pool[j]).collect(),
                    },
                );
            }
            Model::Set(m)
        }
    }
}

fn valuation_count(metas: &[(&str, Sort, usize)], class: Class, vals: &Values, domain: usize) -> u64 {
    slots(metas, domain)
        .iter()
        .map(|&(i, _)| match metas[i].1 {
            Sort::Problem => vals.problems(class) as u64,
            Sort::Proposition => vals.props.len() as u64,
        })
        .product()
}

/// True when the premises are valid and the conclusion is not.
fn refutes(model: &Model, premises: &[Formula], conclusion: &Formula) -> bool {
    for p in premises {
        if !model.valid(p).expect("catalog formulas evaluate") {
            return false;
        }
    }
    !model.valid(conclusion).expect("catalog formulas evaluate")
}

/// A refuting valuation of the atomic form on one space and domain.
pub fn refute_on_frame(
    metas: &[(&str, Sort, usize)],
    form: &Form,
    class: Class,
    vals: &Values,
    domain: usize,
) -> Option<Model> {
    let (premises, conclusion) = atomic_form(metas, form);
    let total = valuation_count(metas, class, vals, domain);
    (0..total).into_par_iter().find_map_first(|code| {
        let m = model_for(metas, class, vals, domain, code);
        refutes(&m, &premises, &conclusion).then_some(m)
    })
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct Census {
    pub spaces: usize,
    pub frames: usize,
    pub valuations: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub space: SpaceSpec,
    pub domain: usize,
    pub model: serde_json::Value,
    pub premises: Vec<String>,
    pub conclusion: String,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SearchOutcome {
    Found {
        witness: Witness,
        census: Census,
    },
    Exhausted {
        census: Census,
        #[serde(skip_serializing_if = "Option::is_none")]
        finiteness: Option<&'static str>,
    },
}

impl SearchOutcome {
    pub fn witness(&self) -> Option<&Witness> {
        match self {
            SearchOutcome::Found { witness, .. } => Some(witness),
            SearchOutcome::Exhausted { .. } => None,
        }
    }
}

/// Searches spaces in canonical order (by size), domains of increasing size,
/// and valuations in lexicographic order; reports the first countermodel to
/// the principle's atomic form. The result does not depend on thread count.
pub fn find_countermodel(pr: &Principle, class: Class, bounds: Bounds) -> SearchOutcome {
    let mut census = Census::default();
    let domains = if pr.has_unary_metas() { bounds.max_domain.max(1) } else { 1 };
    let spaces = enumerate_spaces(bounds.max_points);
    census.spaces = spaces.len();
    for sp in &spaces {
        let vals = values(sp, class, bounds.max_stalk);
        for d in 1..=domains {
            census.frames += 1;
            let (premises, conclusion) = pr.atomic_instance();
            if let Some(m) = refute_on_frame(&pr.metas, &pr.form, class, &vals, d) {
                census.valuations += 1;
                return SearchOutcome::Found {
                    witness: Witness {
                        space: sp.to_spec(),
                        domain: d,
                        model: m.to_json(),
                        premises: premises.iter().map(|f| f.to_string()).collect(),
                        conclusion: conclusion.to_string(),
                    },
                    census,
                };
            }
            census.valuations += valuation_count(&pr.metas, class, &vals, d);
        }
    }
    SearchOutcome::Exhausted {
        census,
        finiteness: pr.status(class).and_then(|s| s.finiteness),
    }
}

/// Runs `f` on a rayon pool of `jobs` threads (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        None => f(),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}

/// Formula pools for instance generation, built from a model's atoms.
#[derive(Clone, Copy, Debug)]
pub struct InstanceGen {
    pub depth: usize,
    /// Cap on the pool size per sort.
    pub pool_cap: usize,
    /// Cap on the number of instances tried per principle.
    pub max_instances: usize,
}

impl Default for InstanceGen {
    fn default() -> InstanceGen {
        InstanceGen {
            depth: 2,
            pool_cap: 12,
            max_instances: 20_000,
        }
    }
}

impl InstanceGen {
    /// Formulas of each sort over the atoms of `sig`. Unary atoms are applied
    /// to the variable `x`, so members may be open in `x`.
    pub fn pools(&self, sig: &Signature) -> (Vec<Formula>, Vec<Formula>) {
        let mut prob = vec![];
        let mut prop = vec![];
        for d in &sig.atoms {
            if d.arity > 1 {
                continue;
            }
            let args: Vec<&str> = if d.arity == 1 { vec!["x"] } else { vec![] };
            let f = Formula::atom(&d.name, d.sort, &args);
            match d.sort {
                Sort::Problem => prob.push(f),
                Sort::Proposition => prop.push(f),
            }
        }
        prob.push(Formula::Bot);
        prop.push(Formula::False);
        prop.push(Formula::True);
        let base_prob = prob.clone();
        let base_prop = prop.clone();
        for _ in 0..self.depth {
            let (op, oq) = (prob.clone(), prop.clone());
            let mut next_prob = vec![];
            let mut next_prop = vec![];
            for f in &oq {
                next_prob.push(Formula::bang(f.clone()));
                next_prop.push(Formula::not(f.clone()));
            }
            for f in &op {
                next_prop.push(Formula::quest(f.clone()));
                next_prob.push(Formula::not(f.clone()));
            }
            for (pool, base, out) in [(&op, &base_prob, &mut next_prob), (&oq, &base_prop, &mut next_prop)] {
                for f in pool.iter() {
                    for g in base {
                        out.push(Formula::and(f.clone(), g.clone()));
                        out.push(Formula::or(f.clone(), g.clone()));
                        out.push(Formula::imp(f.clone(), g.clone()));
                    }
                    if f.free_var_set().contains("x") {
                        out.push(Formula::forall("x", f.clone()));
                        out.push(Formula::exists("x", f.clone()));
                    }
                }
            }
            for (dst, src) in [(&mut prob, next_prob), (&mut prop, next_prop)] {
                for f in src {
                    if dst.len() >= self.pool_cap {
                        break;
                    }
                    if !dst.contains(&f) {
                        dst.push(f);
                    }
                }
            }
        }
        (prob, prop)
    }

    /// Assignments of pool members to the metavariables, in order, capped.
    pub fn assignments(&self, metas: &[(&str, Sort, usize)], sig: &Signature) -> Vec<Assignment> {
        let (prob, prop) = self.pools(sig);
        let pool = |s: Sort| if s == Sort::Problem { &prob } else { &prop };
        let mut out = vec![Assignment::new()];
        for &(m, sort, arity) in metas {
            let mut next = Vec::new();
            'outer: for a in &out {
                for f in pool(sort) {
                    let fam = if arity == 0 {
                        Family::constant(f.clone())
                    } else {
                        Family::new(&["x"], f.clone())
                    };
                    next.push(a.clone().set(m, fam));
                    if next.len() >= self.max_instances {
                        break 'outer;
                    }
                }
            }
            out = next;
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CheckOutcome {
    HoldsOnInstances { instances: usize },
    Counterinstance { premises: Vec<String>, conclusion: String },
}

/// Checks a principle on instances drawn from the model's atoms.
pub fn check_principle(model: &Model, pr: &Principle, gen: &InstanceGen) -> CheckOutcome {
    let sig = model.signature();
    let asgs = gen.assignments(&pr.metas, &sig);
    let n = asgs.len();
    let hit = asgs.par_iter().find_map_first(|a| {
        let inst = |s: &Schema| s.instantiate_open(&restrict(a, &metas_of(&pr.metas, s))).ok();
        let premises: Option<Vec<Formula>> = pr.form.premises.iter().map(inst).collect();
        let premises: Vec<Formula> = premises?.iter().map(|f| f.universal_closure()).collect();
        let conclusion = inst(&pr.form.conclusion)?.universal_closure();
        refutes(model, &premises, &conclusion).then(|| CheckOutcome::Counterinstance {
            premises: premises.iter().map(|f| f.to_string()).collect(),
            conclusion: conclusion.to_string(),
        })
    });
    hit.unwrap_or(CheckOutcome::HoldsOnInstances { instances: n })
}

fn metas_of<'a>(metas: &[(&'a str, Sort, usize)], s: &Schema) -> Vec<(&'a str, Sort, usize)> {
    metas
        .iter()
        .copied()
        .filter(|m| s.metas.iter().any(|n| n.name == m.0))
        .collect()
}

/// The corpus frames: every space up to `max_points`, every domain size up
/// to `max_domain`.
pub fn corpus_frames(bounds: Bounds, class: Class) -> Vec<(Values, usize)> {
    let mut out = Vec::new();
    for sp in enumerate_spaces(bounds.max_points) {
        let v = values(&sp, class, bounds.max_stalk);
        for d in 1..=bounds.max_domain {
            out.push((v.clone(), d));
        }
    }
    out
}

/// Whether the principle holds for every valuation on the frame.
pub fn holds_on_frame(pr: &Principle, class: Class, vals: &Values, domain: usize) -> bool {
    let d = if pr.has_unary_metas() { domain } else { 1 };
    refute_on_frame(&pr.metas, &pr.form, class, vals, d).is_none()
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub premises: Vec<&'static str>,
    pub consequence: &'static str,
    pub class: Class,
    pub space: SpaceSpec,
    pub domain: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatrixReport {
    pub frames: usize,
    pub implications: usize,
    /// (frame, implication) pairs whose premises all hold.
    pub exercised: usize,
    pub violations: Vec<Violation>,
}

/// For every corpus frame and every listed implication, checks that the
/// premises holding on the frame forces the consequence to hold.
pub fn implication_matrix_check(bounds: Bounds, classes: &[Class]) -> MatrixReport {
    let mut violations = Vec::new();
    let mut frames = 0;
    let mut exercised = 0;
    for &class in classes {
        for (vals, d) in corpus_frames(bounds, class) {
            frames += 1;
            let holds: BTreeMap<&str, bool> = catalog()
                .iter()
                .chain(auxiliary())
                .map(|p| (p.name, holds_on_frame(p, class, &vals, d)))
                .collect();
            for (premises, consequence) in IMPLICATIONS {
                if !premises.iter().all(|p| holds[p]) {
                    continue;
                }
                exercised += 1;
                if !holds[consequence] {
                    violations.push(Violation {
                        premises: premises.to_vec(),
                        consequence,
                        class,
                        space: vals.space.to_spec(),
                        domain: d,
                    });
                }
            }
        }
    }
    MatrixReport {
        frames,
        implications: IMPLICATIONS.len(),
        exercised,
        violations,
    }
}

/// A frame on which `holds` holds and `fails` does not, if any.
pub fn find_separating(holds: &Principle, fails: &Principle, class: Class, bounds: Bounds) -> Option<(SpaceSpec, usize)> {
    corpus_frames(bounds, class).into_iter().find_map(|(vals, d)| {
        (holds_on_frame(holds, class, &vals, d) && !holds_on_frame(fails, class, &vals, d))
            .then(|| (vals.space.to_spec(), d))
    })
}

/// Pairs (weaker, stronger) where the weaker principle does not imply the
/// stronger one, known only from an infinite countermodel.
pub const STRICT: &[(&str, &str)] = &[("quest-star", "bang"), ("no-ignorabimus", "stability")];

#[derive(Clone, Debug, Serialize)]
pub struct StrictnessReport {
    pub holds: &'static str,
    pub fails: &'static str,
    pub class: Class,
    /// The first separating frame, or `None` if the search exhausted.
    pub witness: Option<(SpaceSpec, usize)>,
    pub frames: usize,
}

/// Searches the corpus for frames separating each strict pair.
pub fn strictness_search(bounds: Bounds) -> Vec<StrictnessReport> {
    let mut out = Vec::new();
    for &(h, f) in STRICT {
        for class in Class::ALL {
            out.push(StrictnessReport {
                holds: h,
                fails: f,
                class,
                witness: find_separating(lookup(h).expect("catalog"), lookup(f).expect("catalog"), class, bounds),
                frames: corpus_frames(bounds, class).len(),
            });
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct StatusRow {
    pub principle: &'static str,
    pub class: Class,
    pub expected: Expected,
    pub computed: Computed,
    pub agrees: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Computed {
    /// No countermodel within the bounds.
    NoCountermodel,
    /// A countermodel on a space with this many points.
    Countermodel(usize),
}

/// Expected statuses against search results within `bounds`.
pub fn status_matrix(bounds: Bounds) -> Vec<StatusRow> {
    let mut rows = Vec::new();
    for pr in catalog() {
        for &class in &Class::ALL {
            let expected = pr.status(class).expect("catalog entry").expected;
            let computed = match find_countermodel(pr, class, bounds) {
                SearchOutcome::Found { witness, .. } => Computed::Countermodel(witness.space.points.len()),
                SearchOutcome::Exhausted { .. } => Computed::NoCountermodel,
            };
            let agrees = matches!(
                (expected, &computed),
                (Expected::FiniteWitness, Computed::Countermodel(_))
                    | (Expected::HoldsInAll | Expected::RequiresInfinite, Computed::NoCountermodel)
            );
            rows.push(StatusRow {
                principle: pr.name,
                class,
                expected,
                computed,
                agrees,
            });
        }
    }
    rows
}
