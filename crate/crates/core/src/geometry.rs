//! Planar geometry over QHC: the theory T, the classes of problems used to
//! set up such theories, and the rewrites between them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{
    check_proof, derive_intuitionistic_lift, EntryKind, Justification, NamedFormula, ProofBuilder, ProofScript,
    Theory, TheoryError, TheoryJson, Verdict,
};
use crate::syntax::{Assignment, Family, Formula, Sort};
use crate::transforms::erase_to_qc;

const ASSET: &str = include_str!("../assets/geometry-T.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemClass {
    PureProposition,
    PureSimple,
    Euclidean,
    WeaklyEuclidean,
    Simple,
    None,
}

impl fmt::Display for ProblemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemClass::PureProposition => "pure-proposition",
            ProblemClass::PureSimple => "pure-simple",
            ProblemClass::Euclidean => "euclidean",
            ProblemClass::WeaklyEuclidean => "weakly-euclidean",
            ProblemClass::Simple => "simple",
            ProblemClass::None => "none",
        })
    }
}

fn is_literal(f: &Formula) -> bool {
    match f {
        Formula::Atom(a) => a.sort == Sort::Proposition,
        Formula::Imp(a, b) => matches!(**b, Formula::False) && is_literal(a) && !matches!(**a, Formula::Imp(..)),
        _ => false,
    }
}

fn is_literal_conj(f: &Formula) -> bool {
    match f {
        Formula::And(a, b) => is_literal_conj(a) && is_literal_conj(b),
        _ => is_literal(f),
    }
}

fn is_positive_condition(f: &Formula) -> bool {
    match f {
        Formula::And(a, b) | Formula::Or(a, b) => is_positive_condition(a) && is_positive_condition(b),
        Formula::Exists(_, a) => is_positive_condition(a),
        _ => is_literal(f),
    }
}

fn is_pure(f: &Formula) -> bool {
    f.sort_of() == Sort::Proposition && !f.any(|g| matches!(g, Formula::Bang(_) | Formula::Quest(_)))
}

fn is_simple(f: &Formula) -> bool {
    match f {
        Formula::Bang(q) => is_pure(q),
        Formula::Bot => true,
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => is_simple(a) && is_simple(b),
        Formula::Forall(_, a) | Formula::Exists(_, a) => is_simple(a),
        _ => false,
    }
}

fn premises_ok(f: &Formula, ok: &dyn Fn(&Formula) -> bool) -> bool {
    match f {
        Formula::Imp(a, b) => matches!(&**a, Formula::Bang(p) if ok(p)) && premises_ok(b, ok),
        Formula::And(a, b) | Formula::Or(a, b) => premises_ok(a, ok) && premises_ok(b, ok),
        Formula::Forall(_, a) | Formula::Exists(_, a) => premises_ok(a, ok),
        _ => true,
    }
}

fn is_euclidean(f: &Formula) -> bool {
    let (_, body) = f.strip_foralls();
    let mut c = match body {
        Formula::Imp(a, b) => match &**a {
            Formula::Bang(p) if is_literal_conj(p) => &**b,
            _ => return false,
        },
        _ => body,
    };
    while let Formula::Exists(_, inner) = c {
        c = inner;
    }
    matches!(c, Formula::Bang(q) if is_literal_conj(q))
}

fn is_pure_simple(f: &Formula) -> bool {
    is_simple(f) && !f.any(|g| matches!(g, Formula::Bang(p) if !matches!(**p, Formula::Atom(_))))
}

/// Every class `f` belongs to, most specific first; `[None]` if none.
pub fn problem_classes(f: &Formula) -> Vec<ProblemClass> {
    if f.check_sorts().is_err() {
        return vec![ProblemClass::None];
    }
    if is_pure(f) {
        return vec![ProblemClass::PureProposition];
    }
    let mut out = Vec::new();
    if f.sort_of() == Sort::Problem && is_simple(f) {
        if is_pure_simple(f) {
            out.push(ProblemClass::PureSimple);
        }
        if is_euclidean(f) {
            out.push(ProblemClass::Euclidean);
        }
        if premises_ok(f, &is_positive_condition) {
            out.push(ProblemClass::WeaklyEuclidean);
        }
        out.push(ProblemClass::Simple);
    } else {
        out.push(ProblemClass::None);
    }
    out
}

/// The most specific class of `f`.
pub fn classify_problem(f: &Formula) -> ProblemClass {
    problem_classes(f)[0]
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    #[error("`{0}` is not a simple problem")]
    NotSimple(String),
    #[error("`{0}` is not a Euclidean problem")]
    NotEuclidean(String),
    #[error("cannot push `?` past the premise `{0}`; premises must have the form !p")]
    Stuck(String),
    #[error("conditions not known to be certifiable: {}", .0.join(", "))]
    Uncertified(Vec<String>),
    #[error("`{0}` needs stability of negated atoms")]
    StabilityRequired(String),
}

/// A proposition obtained by pushing `?` inward, with the premise-side
/// conditions that still carry `?!`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pushed {
    pub formula: Formula,
    pub residue: Vec<Formula>,
}

/// Pushes the `?` of `?f` (or of a simple problem `f`) through the
/// connectives, dropping `?!` in conclusions.
pub fn push_wn(f: &Formula) -> Result<Pushed, RewriteError> {
    let g = match f {
        Formula::Quest(g) => &**g,
        g if g.sort_of() == Sort::Problem => g,
        _ => return Err(RewriteError::NotSimple(f.to_string())),
    };
    if !is_simple(g) {
        return Err(RewriteError::NotSimple(g.to_string()));
    }
    let mut residue = Vec::new();
    let formula = push(g, &mut residue)?;
    Ok(Pushed { formula, residue })
}

fn push(g: &Formula, residue: &mut Vec<Formula>) -> Result<Formula, RewriteError> {
    Ok(match g {
        Formula::Bang(q) => (**q).clone(),
        Formula::Bot => Formula::False,
        Formula::And(a, b) => Formula::and(push(a, residue)?, push(b, residue)?),
        Formula::Or(a, b) => Formula::or(push(a, residue)?, push(b, residue)?),
        Formula::Forall(v, a) => Formula::forall(v, push(a, residue)?),
        Formula::Exists(v, a) => Formula::exists(v, push(a, residue)?),
        Formula::Imp(a, b) => match &**a {
            Formula::Bang(p) => {
                if !residue.iter().any(|r| r.alpha_eq(p)) {
                    residue.push((**p).clone());
                }
                Formula::imp(Formula::quest((**a).clone()), push(b, residue)?)
            }
            _ => return Err(RewriteError::Stuck(a.to_string())),
        },
        _ => return Err(RewriteError::NotSimple(g.to_string())),
    })
}

fn drop_quest_bang(f: &Formula) -> Formula {
    match f {
        Formula::Quest(a) => match &**a {
            Formula::Bang(p) => (**p).clone(),
            _ => f.clone(),
        },
        Formula::And(a, b) => Formula::and(drop_quest_bang(a), drop_quest_bang(b)),
        Formula::Or(a, b) => Formula::or(drop_quest_bang(a), drop_quest_bang(b)),
        Formula::Imp(a, b) => Formula::imp(drop_quest_bang(a), drop_quest_bang(b)),
        Formula::Forall(v, a) => Formula::forall(v, drop_quest_bang(a)),
        Formula::Exists(v, a) => Formula::exists(v, drop_quest_bang(a)),
        _ => f.clone(),
    }
}

/// The pure proposition a (weakly) Euclidean problem yields once solved.
/// Premise-side `?!p` become `p` only when the conditions are assumed
/// certifiable.
pub fn classical_shadow(f: &Formula, assume_certifiable: bool) -> Result<Formula, RewriteError> {
    let classes = problem_classes(f);
    if !classes.contains(&ProblemClass::Euclidean) && !classes.contains(&ProblemClass::WeaklyEuclidean) {
        return Err(RewriteError::NotEuclidean(f.to_string()));
    }
    let pushed = push_wn(f)?;
    if !pushed.residue.is_empty() && !assume_certifiable {
        return Err(RewriteError::Uncertified(
            pushed.residue.iter().map(|r| r.to_string()).collect(),
        ));
    }
    Ok(drop_quest_bang(&pushed.formula))
}

/// Rewrites a Euclidean problem so that `!` applies to atoms only:
/// `!(p /\ q)` splits into `!p /\ !q`, and with `stability` set, `!~p`
/// becomes `~!p`.
pub fn pure_simple_normal_form(f: &Formula, stability: bool) -> Result<Formula, RewriteError> {
    if !problem_classes(f).contains(&ProblemClass::Euclidean) {
        return Err(RewriteError::NotEuclidean(f.to_string()));
    }
    normalize(f, stability)
}

fn normalize(f: &Formula, stability: bool) -> Result<Formula, RewriteError> {
    Ok(match f {
        Formula::Bang(p) => split_literals(p, stability)?,
        Formula::And(a, b) => Formula::and(normalize(a, stability)?, normalize(b, stability)?),
        Formula::Or(a, b) => Formula::or(normalize(a, stability)?, normalize(b, stability)?),
        Formula::Imp(a, b) => Formula::imp(normalize(a, stability)?, normalize(b, stability)?),
        Formula::Forall(v, a) => Formula::forall(v, normalize(a, stability)?),
        Formula::Exists(v, a) => Formula::exists(v, normalize(a, stability)?),
        _ => f.clone(),
    })
}

fn split_literals(p: &Formula, stability: bool) -> Result<Formula, RewriteError> {
    Ok(match p {
        Formula::And(a, b) => Formula::and(split_literals(a, stability)?, split_literals(b, stability)?),
        Formula::Imp(a, _) if stability => Formula::not(Formula::bang((**a).clone())),
        Formula::Imp(..) => return Err(RewriteError::StabilityRequired(p.to_string())),
        _ => Formula::bang(p.clone()),
    })
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("entry {name} classifies as {found}, expected {expected}")]
    Classification {
        name: String,
        found: ProblemClass,
        expected: &'static str,
    },
}

#[derive(Deserialize)]
struct Asset {
    version: u32,
    #[serde(flatten)]
    theory: TheoryJson,
    #[serde(default)]
    extensions: Vec<NamedFormula>,
    #[serde(rename = "betweenness-characterization")]
    betweenness: String,
}

#[derive(Clone, Debug)]
pub struct Geometry {
    pub version: u32,
    pub theory: Theory,
    /// Optional entries, not part of T.
    pub extensions: Vec<(String, Formula)>,
    /// Betweenness expressed through equidistance.
    pub betweenness: Formula,
}

impl Geometry {
    /// Entry names in the order of the theory's numbering.
    pub fn entry_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.theory.entries.iter().map(|e| e.name.as_str()).collect();
        names.sort_by_key(|n| n.parse::<u32>().unwrap_or(u32::MAX));
        names
    }

    pub fn formula(&self, name: &str) -> &Formula {
        &self.theory.lookup(name).unwrap_or_else(|| panic!("no entry {name}")).formula
    }

    pub fn postulates(&self) -> Vec<&str> {
        self.entries_of(EntryKind::Postulate)
    }

    pub fn axioms(&self) -> Vec<&str> {
        self.entries_of(EntryKind::Axiom)
    }

    fn entries_of(&self, kind: EntryKind) -> Vec<&str> {
        self.entry_names()
            .into_iter()
            .filter(|n| self.theory.lookup(n).map(|e| e.kind) == Some(kind))
            .collect()
    }

    /// The theory with the optional extensions added as entries.
    pub fn extended(&self) -> Theory {
        let mut t = self.theory.clone();
        for (name, f) in &self.extensions {
            t.add(name, EntryKind::Mixed, f.clone()).expect("extension entries are closed");
        }
        t
    }
}

fn is_certifiability(f: &Formula) -> bool {
    let (_, body) = f.strip_foralls();
    match body {
        Formula::Imp(p, c) => {
            is_literal(p) && matches!(&**c, Formula::Quest(b) if matches!(&**b, Formula::Bang(q) if q.alpha_eq(p)))
        }
        _ => false,
    }
}

/// Loads T and checks every entry against its expected class.
pub fn load_theory() -> Result<Geometry, GeometryError> {
    let asset: Asset = serde_json::from_str(ASSET).map_err(TheoryError::from)?;
    let theory = Theory::from_spec(&asset.theory)?;
    for e in &theory.entries {
        let found = classify_problem(&e.formula);
        let (ok, expected) = match e.kind {
            EntryKind::Axiom => (found == ProblemClass::PureProposition, "pure-proposition"),
            EntryKind::Postulate => (
                problem_classes(&e.formula).contains(&ProblemClass::Euclidean),
                "euclidean",
            ),
            EntryKind::Mixed => (is_certifiability(&e.formula), "certifiability template"),
        };
        if !ok {
            return Err(GeometryError::Classification {
                name: e.name.clone(),
                found,
                expected,
            });
        }
    }
    let parse = |name: &str, text: &str| {
        theory.parse(text).map_err(|source| TheoryError::Parse {
            name: name.to_string(),
            source,
        })
    };
    let extensions = asset
        .extensions
        .iter()
        .map(|e| Ok((e.name.clone(), parse(&e.name, &e.formula)?.universal_closure())))
        .collect::<Result<Vec<_>, TheoryError>>()?;
    let betweenness = parse("betweenness", &asset.betweenness)?.universal_closure();
    Ok(Geometry {
        version: asset.version,
        theory,
        extensions,
        betweenness,
    })
}

fn instantiate_all(b: &mut ProofBuilder, mut id: u64, vars: &[String]) -> u64 {
    for v in vars {
        id = instantiate_one(b, id, v, v);
    }
    id
}

fn instantiate_one(b: &mut ProofBuilder, id: u64, bound: &str, term: &str) -> u64 {
    let Formula::Forall(_, inner) = b.formula(id).clone() else {
        panic!("line {id} is not universal");
    };
    let inst = b.axiom(
        "all-e",
        &Assignment::new().set("A", Family::new(&[bound], *inner)).term("t", term),
    );
    b.mp(id, inst)
}

/// The open body of a cited entry, lifted to `!p -> !q`.
fn lifted_entry(b: &mut ProofBuilder, g: &Geometry, name: &str) -> (u64, Vec<String>, Formula) {
    let f = g.formula(name).clone();
    let (vars, body) = f.strip_foralls();
    let vars = vars.to_vec();
    let body = body.clone();
    let t = b.theory_entry(name, f.clone());
    let open = instantiate_all(b, t, &vars);
    let Formula::Imp(p, q) = &body else {
        panic!("entry {name} is not an implication");
    };
    let banged = b.nec_bang(open);
    let law = b.axiom(
        "bang-imp",
        &Assignment::new().constant("P", (**p).clone()).constant("Q", (**q).clone()),
    );
    (b.mp(banged, law), vars, (**p).clone())
}

fn close(b: &mut ProofBuilder, mut id: u64, vars: &[String]) -> u64 {
    for v in vars.iter().rev() {
        id = b.gen(id, v);
    }
    id
}

/// `!bet(a,b,a) -> ~~!eq(a,b)` and then `~(!bet(a,b,a) /\ ~!eq(a,b))`.
fn identity_of_betweenness(g: &Geometry) -> ProofScript {
    let mut b = ProofBuilder::new(Some(&g.theory.name));
    let (lifted, vars, _) = lifted_entry(&mut b, g, "4");
    let Formula::Imp(bb, be) = b.formula(lifted).clone() else { unreachable!() };
    let dn = b.dn_intro(&be);
    let weak = b.hs(lifted, dn);
    let x = Formula::and((*bb).clone(), Formula::not((*be).clone()));
    let e1 = b.axiom("and-e1", &Assignment::new().constant("A", (*bb).clone()).constant("B", Formula::not((*be).clone())));
    let e2 = b.axiom("and-e2", &Assignment::new().constant("A", (*bb).clone()).constant("B", Formula::not((*be).clone())));
    let left = b.hs(e1, weak);
    let s = b.axiom(
        "s",
        &Assignment::new()
            .constant("A", x)
            .constant("B", Formula::not((*be).clone()))
            .constant("C", Formula::Bot),
    );
    let m = b.mp(left, s);
    let done = b.mp(e2, m);
    close(&mut b, done, &vars);
    b.finish()
}

/// `!C1 /\ !C2 /\ !C3 -> (~!eq(x,y) -> ~!ncol(a,b,c))` from entry 5.
fn lower_dimension_shuffle(g: &Geometry) -> ProofScript {
    let mut b = ProofBuilder::new(Some(&g.theory.name));
    let (lifted, vars, p) = lifted_entry(&mut b, g, "5");
    let mut ncol = &p;
    for _ in 0..3 {
        let Formula::And(l, _) = ncol else { unreachable!() };
        ncol = l;
    }
    let ncol = ncol.clone();
    let (split, split_line) = b.split_bang_until(&p, &|f| f.alpha_eq(&ncol));
    let split_line = split_line.expect("conjunctive antecedent");
    let to_e = b.hs(split_line, lifted);
    let Formula::And(rest, c3) = split.clone() else { unreachable!() };
    let Formula::And(rest, c2) = *rest else { unreachable!() };
    let Formula::And(bn, c1) = *rest else { unreachable!() };
    let conds = Formula::and(Formula::and(*c1, *c2), *c3);
    let reordered = Formula::and(conds, (*bn).clone());
    let proj = b.project(&reordered, &split);
    let h = b.hs(proj, to_e);
    let curried = b.export(h);
    let Formula::Imp(_, inner) = b.formula(curried).clone() else { unreachable!() };
    let Formula::Imp(n, e) = *inner else { unreachable!() };
    let contra = b.contraposition(&n, &e);
    let done = b.hs(curried, contra);
    close(&mut b, done, &vars);
    b.finish()
}

/// The classical shadow of segment construction, using certifiability of
/// its negated-atom condition.
fn segment_construction_shadow(g: &Geometry) -> ProofScript {
    let mut b = ProofBuilder::new(Some(&g.theory.name));
    let f = g.formula("6").clone();
    let (vars, body) = f.strip_foralls();
    let vars = vars.to_vec();
    let Formula::Imp(prem, concl) = body.clone() else { unreachable!() };
    let Formula::Exists(x, bang_r) = (*concl).clone() else { unreachable!() };
    let Formula::Bang(r) = (*bang_r).clone() else { unreachable!() };
    let Formula::Bang(ne) = (*prem).clone() else { unreachable!() };
    let Formula::Imp(cong, _) = (*ne).clone() else { unreachable!() };
    let Formula::Atom(cong) = *cong else { unreachable!() };

    let t = b.theory_entry("6", f.clone());
    let open = instantiate_all(&mut b, t, &vars);
    let q = b.nec_quest(open);
    let qi = b.axiom(
        "quest-imp",
        &Assignment::new().constant("A", (*prem).clone()).constant("B", (*concl).clone()),
    );
    let pushed = b.mp(q, qi);
    let qe = b.axiom("quest-ex", &Assignment::new().set("A", Family::new(&[x.as_str()], (*bang_r).clone())));
    let fwd = b.iff_forward(qe);
    let counit = b.axiom("counit", &Assignment::new().constant("P", (*r).clone()));
    let drop = b.mono_exists(counit, &x);
    let chain = b.hs(pushed, fwd);
    let chain = b.hs(chain, drop);

    let cert = g.formula("18").clone();
    let (cvars, _) = cert.strip_foralls();
    let cvars = cvars.to_vec();
    let mut c = b.theory_entry("18", cert.clone());
    for (v, term) in cvars.iter().zip(&cong.args) {
        c = instantiate_one(&mut b, c, v, term);
    }
    let done = b.hs(c, chain);
    close(&mut b, done, &vars);
    b.finish()
}

/// Proof scripts over T that the kernel accepts.
pub fn bundled_derivations(g: &Geometry) -> Vec<(String, ProofScript)> {
    let mut out = Vec::new();
    for name in g.axioms() {
        let script = derive_intuitionistic_lift(g.formula(name), &g.theory).expect("axioms are classical");
        out.push((format!("lift-{name}"), script));
    }
    out.push(("identity-of-betweenness".to_string(), identity_of_betweenness(g)));
    out.push(("lower-dimension".to_string(), lower_dimension_shuffle(g)));
    out.push(("segment-construction-shadow".to_string(), segment_construction_shadow(g)));
    out
}

/// A script with one line altered, and the id of that line.
#[derive(Clone, Debug)]
pub struct Mutant {
    pub name: &'static str,
    pub script: ProofScript,
    pub line: u64,
}

fn mutate(
    name: &'static str,
    script: &ProofScript,
    pick: impl Fn(&Justification) -> bool,
    change: impl Fn(&mut crate::calculus::ProofLine),
) -> Mutant {
    let mut s = script.clone();
    let line = s.lines.iter_mut().find(|l| pick(&l.by)).expect("mutation target");
    change(line);
    Mutant {
        name,
        line: line.id,
        script: s,
    }
}

/// Single-line corruptions of bundled derivations.
pub fn mutants(g: &Geometry) -> Vec<Mutant> {
    let ds = bundled_derivations(g);
    let get = |n: &str| &ds.iter().find(|(m, _)| m == n).expect("bundled").1;
    let lift9 = get("lift-9");
    let ib = get("identity-of-betweenness");
    let seg = get("segment-construction-shadow");
    vec![
        mutate(
            "wrong-mp-target",
            lift9,
            |j| matches!(j, Justification::Mp { .. }),
            |l| {
                if let Justification::Mp { minor, .. } = &mut l.by {
                    l.by = Justification::Mp { minor: *minor, major: *minor };
                }
            },
        ),
        mutate(
            "altered-entry",
            lift9,
            |j| matches!(j, Justification::Theory { .. }),
            |l| l.formula = "forall a b c. (bet(a,b,c) -> bet(a,c,b))".to_string(),
        ),
        mutate(
            "unknown-entry",
            seg,
            |j| matches!(j, Justification::Theory { name } if name == "18"),
            |l| l.by = Justification::Theory { name: "20".to_string() },
        ),
        mutate(
            "wrong-schema",
            ib,
            |j| matches!(j, Justification::Axiom { name, .. } if name == "and-e1"),
            |l| {
                if let Justification::Axiom { inst, terms, .. } = &l.by {
                    l.by = Justification::Axiom {
                        name: "and-e2".to_string(),
                        inst: inst.clone(),
                        terms: terms.clone(),
                    };
                }
            },
        ),
        mutate(
            "forward-reference",
            ib,
            |j| matches!(j, Justification::Mp { .. }),
            |l| {
                if let Justification::Mp { major, .. } = l.by {
                    l.by = Justification::Mp { minor: l.id + 1, major };
                }
            },
        ),
        mutate(
            "bang-on-problem",
            seg,
            |j| matches!(j, Justification::NecQuest { .. }),
            |l| {
                if let Justification::NecQuest { line } = l.by {
                    l.by = Justification::NecBang { line };
                }
            },
        ),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct EntryReport {
    pub name: String,
    pub kind: EntryKind,
    pub class: ProblemClass,
    pub formula: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub version: u32,
    pub entries: Vec<EntryReport>,
    pub shadows: Vec<CheckLine>,
    pub normal_forms: Vec<CheckLine>,
    pub derivations: Vec<CheckLine>,
    pub mutants: Vec<CheckLine>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        [&self.shadows, &self.normal_forms, &self.derivations, &self.mutants]
            .iter()
            .all(|v| v.iter().all(|c| c.ok))
    }
}

/// Runs every check on T: classification, shadows against erasure, normal
/// forms, bundled derivations and their mutants.
pub fn verify(g: &Geometry) -> VerifyReport {
    let entries = g
        .entry_names()
        .iter()
        .map(|n| {
            let e = g.theory.lookup(n).expect("listed entry");
            EntryReport {
                name: e.name.clone(),
                kind: e.kind,
                class: classify_problem(&e.formula),
                formula: e.formula.to_string(),
            }
        })
        .collect();
    let mut shadows = Vec::new();
    let mut normal_forms = Vec::new();
    for n in g.postulates() {
        let f = g.formula(n);
        let shadow = classical_shadow(f, true);
        let erased = erase_to_qc(f);
        let ok = matches!((&shadow, &erased), (Ok(s), Ok(e)) if s.alpha_eq(e) && is_pure(s));
        shadows.push(CheckLine {
            name: n.to_string(),
            ok,
            detail: shadow.map(|s| s.to_string()).unwrap_or_else(|e| e.to_string()),
        });
        let nf = pure_simple_normal_form(f, true);
        let ok = matches!(&nf, Ok(h) if classify_problem(h) == ProblemClass::PureSimple);
        normal_forms.push(CheckLine {
            name: n.to_string(),
            ok,
            detail: nf.map(|s| s.to_string()).unwrap_or_else(|e| e.to_string()),
        });
    }
    let derivations = bundled_derivations(g)
        .into_iter()
        .map(|(name, s)| {
            let v = check_proof(&s, &g.theory);
            CheckLine {
                name,
                ok: v.is_accepted(),
                detail: v.to_string(),
            }
        })
        .collect();
    let mutants = mutants(g)
        .into_iter()
        .map(|m| {
            let v = check_proof(&m.script, &g.theory);
            let ok = matches!(v, Verdict::Rejected { line, .. } if line == m.line);
            CheckLine {
                name: m.name.to_string(),
                ok,
                detail: format!("mutated line {}: {v}", m.line),
            }
        })
        .collect();
    VerifyReport {
        version: g.version,
        entries,
        shadows,
        normal_forms,
        derivations,
        mutants,
    }
}
