mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use qhc::calculus::{check_proof, ProofBuilder, Theory, Verdict};
use qhc::geometry::{classify_problem, load_theory};
use qhc::model::{Class, Model};
use qhc::principles::{values, InstanceGen};
use qhc::set_models::{AtomTable, ModelClass, SetModel};
use qhc::sheaf::{Sheaf, SheafModel, SheafTable};
use qhc::soundness::schema_instances;
use qhc::syntax::{parse, Formula, Printer, Signature, Sort};
use qhc::topology::{enumerate_spaces, FiniteSpace, PointSet};
use qhc::transforms::{box_translate, retract_to_qh, s4_eval};

use common::{any_formula, formula, heyting, simple_formula, RawModel, RawSheaf};

fn spaces(max: usize) -> &'static [Arc<FiniteSpace>] {
    static SMALL: OnceLock<Vec<Arc<FiniteSpace>>> = OnceLock::new();
    static LARGE: OnceLock<Vec<Arc<FiniteSpace>>> = OnceLock::new();
    let cell = if max <= 3 { &SMALL } else { &LARGE };
    cell.get_or_init(|| enumerate_spaces(max).into_iter().map(Arc::new).collect())
}

/// Sheaves with stalks of size at most 2, per space of at most 4 points.
fn sheaves() -> &'static [(Arc<FiniteSpace>, Arc<Vec<Sheaf>>)] {
    static CELL: OnceLock<Vec<(Arc<FiniteSpace>, Arc<Vec<Sheaf>>)>> = OnceLock::new();
    CELL.get_or_init(|| {
        spaces(4)
            .iter()
            .map(|sp| {
                let v = values(sp, Class::Sheaf, 2);
                (v.space, v.sheaves)
            })
            .collect()
    })
}

fn pick<T: Copy>(xs: &[T], i: usize) -> T {
    xs[i % xs.len()]
}

/// A model of `class` interpreting `p`, `q/2`, `a`, `b/1` over a space of at
/// most three points, every value chosen from `seeds`.
fn model(class: Class, space: usize, d: usize, seeds: &[usize]) -> Model {
    let sp = spaces(3)[space % spaces(3).len()].clone();
    let mut seeds = seeds.iter().copied().cycle();
    let mut next = || seeds.next().unwrap();
    let props = if class == Class::Tk { sp.regular_opens() } else { sp.all_subsets().collect() };
    let table = |arity: usize, pool: &[PointSet], next: &mut dyn FnMut() -> usize| AtomTable {
        arity,
        values: (0..d.pow(arity as u32)).map(|_| pick(pool, next())).collect(),
    };
    let p = table(0, &props, &mut next);
    let q = table(2, &props, &mut next);
    let mut m = match class {
        Class::Sheaf => {
            let v = values(&sp, Class::Sheaf, 2);
            let mut m = SheafModel::new(v.space.clone(), d);
            for (name, arity) in [("a", 0), ("b", 1)] {
                let vals = (0..d.pow(arity)).map(|_| v.sheaves[next() % v.sheaves.len()].clone()).collect();
                m.problems.insert(name.into(), SheafTable { arity: arity as usize, values: vals });
            }
            return Model::Sheaf({
                m.propositions.insert("p".into(), p);
                m.propositions.insert("q".into(), q);
                m
            });
        }
        Class::Et => SetModel::new(sp.clone(), d, ModelClass::EulerTarski),
        Class::Tk => SetModel::new(sp.clone(), d, ModelClass::TarskiKolmogorov),
    };
    let opens = sp.opens();
    m.problems.insert("a".into(), table(0, &opens, &mut next));
    m.problems.insert("b".into(), table(1, &opens, &mut next));
    m.propositions.insert("p".into(), p);
    m.propositions.insert("q".into(), q);
    Model::Set(m)
}

fn class() -> impl Strategy<Value = Class> {
    prop::sample::select(&Class::ALL[..])
}

fn seeds() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(any::<usize>(), 12)
}

fn env(x: usize, y: usize, d: usize) -> BTreeMap<String, usize> {
    BTreeMap::from([("x".to_string(), x % d), ("y".to_string(), y % d)])
}

fn raw(sp: &FiniteSpace, f: &Sheaf) -> RawSheaf {
    RawSheaf {
        stalks: f.stalks().to_vec(),
        maps: sp.strict_pairs().map(|(x, y)| ((x, y), f.map(x, y).to_vec())).collect(),
    }
}

fn raw_space(sp: &FiniteSpace) -> RawModel {
    let n = sp.len();
    RawModel {
        points: (0..n).map(|i| sp.name(i).to_string()).collect(),
        le: (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).filter(|&(x, y)| sp.le(x, y)).collect(),
        sheaves: BTreeMap::new(),
    }
}

fn rename_bound(f: &Formula, from: &str, to: &str) -> Formula {
    let go = |g: &Formula| rename_bound(g, from, to);
    match f {
        Formula::Forall(v, b) if v == from => Formula::forall(to, go(&b.substitute1(from, to))),
        Formula::Exists(v, b) if v == from => Formula::exists(to, go(&b.substitute1(from, to))),
        Formula::Forall(v, b) => Formula::forall(v, go(b)),
        Formula::Exists(v, b) => Formula::exists(v, go(b)),
        Formula::And(l, r) => Formula::and(go(l), go(r)),
        Formula::Or(l, r) => Formula::or(go(l), go(r)),
        Formula::Imp(l, r) => Formula::imp(go(l), go(r)),
        Formula::Bang(p) => Formula::bang(go(p)),
        Formula::Quest(a) => Formula::quest(go(a)),
        _ => f.clone(),
    }
}

/// Rewrites every `(A /\ B) /\ C` as `A /\ (B /\ C)`.
fn reassociate(f: &Formula) -> Formula {
    match f {
        Formula::And(l, r) => match &**l {
            Formula::And(a, b) => reassociate(&Formula::and((**a).clone(), Formula::and((**b).clone(), (**r).clone()))),
            _ => Formula::and(reassociate(l), reassociate(r)),
        },
        Formula::Or(l, r) => Formula::or(reassociate(l), reassociate(r)),
        Formula::Imp(l, r) => Formula::imp(reassociate(l), reassociate(r)),
        Formula::Forall(v, b) => Formula::forall(v, reassociate(b)),
        Formula::Exists(v, b) => Formula::exists(v, reassociate(b)),
        Formula::Bang(p) => Formula::bang(reassociate(p)),
        Formula::Quest(a) => Formula::quest(reassociate(a)),
        _ => f.clone(),
    }
}

/// A derived-rule proof picked by `op` from closed `a` and `b` of one sort.
fn derivation(op: usize, a: &Formula, b: &Formula) -> ProofBuilder {
    let mut pb = ProofBuilder::new(None);
    let problem = a.sort_of() == Sort::Problem;
    match op % 7 {
        0 => {
            pb.identity(a);
        }
        1 => {
            pb.dn_intro(a);
        }
        2 => {
            pb.contraposition(a, b);
        }
        3 => {
            pb.project(&Formula::and(a.clone(), b.clone()), &Formula::and(b.clone(), a.clone()));
        }
        4 => {
            let l = pb.dn_intro(a);
            let r = pb.dn_intro(&Formula::not(Formula::not(a.clone())));
            pb.hs(l, r);
        }
        5 if problem => {
            pb.quest_and(a, b);
        }
        _ if problem => {
            let l = pb.dn_intro(a);
            pb.mono_quest(l);
        }
        _ => {
            let l = pb.contraposition(a, b);
            pb.mono_bang(l);
        }
    }
    pb
}

fn unary_instances() -> &'static [(&'static str, Formula)] {
    static CELL: OnceLock<Vec<(&'static str, Formula)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let sig = Signature::new()
            .with("p", Sort::Proposition, 0)
            .with("a", Sort::Problem, 0)
            .with("b", Sort::Problem, 1);
        let gen = InstanceGen {
            depth: 1,
            pool_cap: 6,
            ..InstanceGen::default()
        };
        schema_instances(&gen, &sig)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1024, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn printed_formulas_parse_back(f in any_formula(4)) {
        let sig = Signature::of_formula(&f);
        prop_assert_eq!(parse(&f.to_string(), &sig).unwrap(), f.clone());
        prop_assert_eq!(parse(&Printer::sugared().print(&f), &sig).unwrap(), f);
    }

    #[test]
    fn substitution_renames_free_occurrences(f in any_formula(4), v in prop::sample::select(vec!["x", "y"])) {
        let g = f.substitute1(v, "z");
        let mut want: BTreeSet<String> = f.free_var_set();
        if want.remove(v) {
            want.insert("z".into());
        }
        prop_assert_eq!(g.free_var_set(), want);
        prop_assert!(g.substitute1("z", v).alpha_eq(&f));
        prop_assert_eq!(g.sort_of(), f.sort_of());
    }

    #[test]
    fn interior_and_closure_laws(space in any::<usize>(), a in any::<u64>(), b in any::<u64>()) {
        let sp = &spaces(4)[space % spaces(4).len()];
        let (a, b) = (PointSet(a) & sp.full(), PointSet(b) & sp.full());
        let int_a = sp.interior(a);
        prop_assert!(int_a.is_subset(a));
        prop_assert!(sp.is_open(int_a));
        prop_assert_eq!(sp.interior(int_a), int_a);
        prop_assert_eq!(sp.interior(a & b), int_a & sp.interior(b));
        prop_assert!(a.is_subset(sp.closure(a)));
        prop_assert_eq!(sp.closure(a | b), sp.closure(a) | sp.closure(b));
        prop_assert_eq!(sp.closure(a), sp.complement(sp.interior(sp.complement(a))));
        prop_assert!(sp.is_regular_open(sp.regularize(a)));
        if sp.is_open(a) && sp.is_open(b) {
            prop_assert!(sp.is_open(a | b) && sp.is_open(a & b));
            prop_assert!(a.is_subset(sp.regularize(a)));
        }
    }

    #[test]
    fn hom_stalks_count_natural_families(space in any::<usize>(), i in any::<usize>(), j in any::<usize>()) {
        let (sp, all) = &sheaves()[space % sheaves().len()];
        let (f, g) = (&all[i % all.len()], &all[j % all.len()]);
        let h = f.hom(g, 10_000).unwrap();
        let rm = raw_space(sp);
        let (rf, rg) = (raw(sp, f), raw(sp, g));
        for x in 0..sp.len() {
            prop_assert_eq!(h.stalk(x), rm.natural_families(&rf, &rg, &rm.up(x)));
        }
        let everywhere: Vec<usize> = (0..sp.len()).collect();
        prop_assert_eq!(f.has_morphism(g, sp.full()).unwrap(), rm.natural_families(&rf, &rg, &everywhere) > 0);
    }

    #[test]
    fn box_translation_preserves_extent(
        f in prop_oneof![simple_formula(Sort::Problem, 3), simple_formula(Sort::Proposition, 3)],
        space in any::<usize>(), d in 1usize..=2, seeds in seeds(), x in any::<usize>(), y in any::<usize>(),
    ) {
        let m = model(Class::Et, space, d, &seeds);
        let Model::Set(sm) = &m else { unreachable!() };
        let env = env(x, y, d);
        let lhs = m.extent(&f, &env).unwrap();
        prop_assert_eq!(lhs, s4_eval(&box_translate(&f).unwrap(), sm, &env).unwrap());
    }

    #[test]
    fn retraction_matches_heyting_semantics(
        f in any_formula(3), space in any::<usize>(), d in 1usize..=2, seeds in seeds(),
        x in any::<usize>(), y in any::<usize>(),
    ) {
        let m = model(Class::Tk, space, d, &seeds);
        let Model::Set(sm) = &m else { unreachable!() };
        let val = |name: &str, args: &[usize]| {
            let t = sm.problems.get(name).or_else(|| sm.propositions.get(name)).unwrap();
            t.values[AtomTable::index(args, d)]
        };
        let mut e = env(x, y, d);
        let lhs = m.extent(&f, &e).unwrap();
        prop_assert_eq!(lhs, heyting(&sm.space, d, &retract_to_qh(&f), &mut e, &val));
    }

    #[test]
    fn unary_schema_instances_are_valid(
        i in any::<usize>(), class in class(), space in any::<usize>(), seeds in seeds(),
    ) {
        let (name, f) = &unary_instances()[i % unary_instances().len()];
        let m = model(class, space, 2, &seeds);
        if let Ok(v) = m.valid(f) {
            prop_assert!(v, "{} instance {} fails in a {} model", name, f, class);
        }
    }

    #[test]
    fn classification_ignores_renaming_and_grouping(f in any_formula(4)) {
        let c = classify_problem(&f);
        prop_assert_eq!(classify_problem(&rename_bound(&rename_bound(&f, "x", "w0"), "y", "w1")), c);
        prop_assert_eq!(classify_problem(&reassociate(&f)), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn built_proofs_check_and_hold(
        problem in any::<bool>(), a in formula(Sort::Problem, 2), b in formula(Sort::Problem, 2),
        p in formula(Sort::Proposition, 2), q in formula(Sort::Proposition, 2),
        op in any::<usize>(), class in class(), space in any::<usize>(), d in 1usize..=2, seeds in seeds(),
    ) {
        let (a, b) = if problem { (a, b) } else { (p, q) };
        let (a, b) = (a.universal_closure(), b.universal_closure());
        let script = derivation(op, &a, &b).finish();
        let Verdict::Accepted { conclusion, hypotheses } = check_proof(&script, &Theory::empty()) else {
            return Err(TestCaseError::fail(format!("rejected: {:?}", check_proof(&script, &Theory::empty()))));
        };
        prop_assert!(hypotheses.is_empty());
        let m = model(class, space, d, &seeds);
        if let Ok(v) = m.valid(&conclusion) {
            prop_assert!(v, "{} fails in a {} model", conclusion, class);
        }
    }
}

#[test]
fn geometry_classes_survive_renaming_and_grouping() {
    let g = load_theory().unwrap();
    for name in g.entry_names() {
        let f = g.formula(name);
        let c = classify_problem(f);
        let vars: Vec<String> = f.all_vars().into_iter().collect();
        let renamed = vars
            .iter()
            .enumerate()
            .fold(f.clone(), |h, (i, v)| rename_bound(&h, v, &format!("v{i}_")));
        assert_eq!(classify_problem(&renamed), c, "{name}");
        assert_eq!(classify_problem(&reassociate(f)), c, "{name}");
    }
}
