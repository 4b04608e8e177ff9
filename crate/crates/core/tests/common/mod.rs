#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use qhc::syntax::{Formula, Sort};
use qhc::topology::{FiniteSpace, PointSet};
use serde_json::Value;

const VARS: [&str; 2] = ["x", "y"];

fn var() -> impl Strategy<Value = String> {
    prop::sample::select(&VARS[..]).prop_map(str::to_string)
}

fn leaf(sort: Sort, problem_atoms: bool) -> BoxedStrategy<Formula> {
    match sort {
        Sort::Problem if !problem_atoms => Just(Formula::Bot).boxed(),
        Sort::Problem => prop_oneof![
            Just(Formula::prob("a", &[])),
            var().prop_map(|v| Formula::prob("b", &[&v])),
            Just(Formula::Bot),
        ]
        .boxed(),
        Sort::Proposition => prop_oneof![
            Just(Formula::prop("p", &[])),
            (var(), var()).prop_map(|(u, v)| Formula::prop("q", &[&u, &v])),
            Just(Formula::True),
            Just(Formula::False),
        ]
        .boxed(),
    }
}

/// Sort-correct formulas over `a`, `b/1`, `p`, `q/2` with at most `depth`
/// nested connectives.
pub fn formula(sort: Sort, depth: usize) -> BoxedStrategy<Formula> {
    formula_with(sort, depth, true)
}

/// Formulas without atomic problems.
pub fn simple_formula(sort: Sort, depth: usize) -> BoxedStrategy<Formula> {
    formula_with(sort, depth, false)
}

fn formula_with(sort: Sort, depth: usize, problem_atoms: bool) -> BoxedStrategy<Formula> {
    let leaf = move |s| leaf(s, problem_atoms);
    if depth == 0 {
        return leaf(sort);
    }
    let same = || formula_with(sort, depth - 1, problem_atoms);
    let other = match sort {
        Sort::Problem => Sort::Proposition,
        Sort::Proposition => Sort::Problem,
    };
    let modal = formula_with(other, depth - 1, problem_atoms).prop_map(move |f| match sort {
        Sort::Problem => Formula::bang(f),
        Sort::Proposition => Formula::quest(f),
    });
    prop_oneof![
        2 => leaf(sort),
        1 => modal,
        1 => (same(), same()).prop_map(|(l, r)| Formula::and(l, r)),
        1 => (same(), same()).prop_map(|(l, r)| Formula::or(l, r)),
        2 => (same(), same()).prop_map(|(l, r)| Formula::imp(l, r)),
        1 => (var(), same()).prop_map(|(v, b)| Formula::forall(&v, b)),
        1 => (var(), same()).prop_map(|(v, b)| Formula::exists(&v, b)),
    ]
    .boxed()
}

pub fn any_formula(depth: usize) -> BoxedStrategy<Formula> {
    prop_oneof![formula(Sort::Problem, depth), formula(Sort::Proposition, depth)].boxed()
}

/// Intuitionistic evaluation in the Heyting algebra of opens, for formulas
/// built from problem atoms, `bot` and the intuitionistic connectives.
/// `val` gives the open for an atom applied to domain elements.
pub fn heyting(
    sp: &FiniteSpace,
    domain: usize,
    f: &Formula,
    env: &mut BTreeMap<String, usize>,
    val: &dyn Fn(&str, &[usize]) -> PointSet,
) -> PointSet {
    let int = |s: PointSet| PointSet::from_indices((0..sp.len()).filter(|&x| sp.up(x).is_subset(s)));
    let over = |v: &str, b: &Formula, env: &mut BTreeMap<String, usize>| -> Vec<PointSet> {
        let saved = env.get(v).copied();
        let out = (0..domain)
            .map(|d| {
                env.insert(v.to_string(), d);
                heyting(sp, domain, b, env, val)
            })
            .collect();
        match saved {
            Some(d) => env.insert(v.to_string(), d),
            None => env.remove(v),
        };
        out
    };
    match f {
        Formula::Atom(a) => {
            let args: Vec<usize> = a.args.iter().map(|v| env[v]).collect();
            val(&a.name, &args)
        }
        Formula::Bot => PointSet::EMPTY,
        Formula::And(l, r) => heyting(sp, domain, l, env, val) & heyting(sp, domain, r, env, val),
        Formula::Or(l, r) => heyting(sp, domain, l, env, val) | heyting(sp, domain, r, env, val),
        Formula::Imp(l, r) => {
            let (l, r) = (heyting(sp, domain, l, env, val), heyting(sp, domain, r, env, val));
            int(l.complement(sp.len()) | r)
        }
        Formula::Forall(v, b) => int(over(v, b, env).into_iter().fold(PointSet::full(sp.len()), |a, s| a & s)),
        Formula::Exists(v, b) => over(v, b, env).into_iter().fold(PointSet::EMPTY, |a, s| a | s),
        _ => panic!("not intuitionistic: {f}"),
    }
}

/// A sheaf read straight from model JSON: stalk sizes and restriction maps
/// along the listed order pairs.
pub struct RawSheaf {
    pub stalks: Vec<usize>,
    pub maps: BTreeMap<(usize, usize), Vec<usize>>,
}

/// A model file reduced to what the oracles need.
pub struct RawModel {
    pub points: Vec<String>,
    pub le: BTreeSet<(usize, usize)>,
    pub sheaves: BTreeMap<String, RawSheaf>,
}

impl RawModel {
    pub fn from_json(v: &Value) -> RawModel {
        let points: Vec<String> = v["points"].as_array().unwrap().iter().map(|p| p.as_str().unwrap().to_string()).collect();
        let idx = |n: &str| points.iter().position(|p| p == n).unwrap();
        let covers: Vec<(usize, usize)> = v["le"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (idx(e[0].as_str().unwrap()), idx(e[1].as_str().unwrap())))
            .collect();
        let n = points.len();
        let mut le: BTreeSet<(usize, usize)> = (0..n).map(|i| (i, i)).chain(covers.iter().copied()).collect();
        loop {
            let extra: Vec<(usize, usize)> = le
                .iter()
                .flat_map(|&(a, b)| le.iter().filter(move |&&(c, _)| c == b).map(move |&(_, d)| (a, d)))
                .filter(|p| !le.contains(p))
                .collect();
            if extra.is_empty() {
                break;
            }
            le.extend(extra);
        }
        let mut sheaves = BTreeMap::new();
        for (name, table) in v["prob_atoms"].as_object().unwrap() {
            let s = &table[""];
            let elems: Vec<Vec<String>> = points
                .iter()
                .map(|p| s["stalks"][p].as_array().unwrap().iter().map(|e| e.as_str().unwrap().to_string()).collect())
                .collect();
            let mut maps = BTreeMap::new();
            for &(x, y) in &covers {
                let key = format!("{}<={}", points[x], points[y]);
                let m = &s["maps"][&key];
                let img = elems[x]
                    .iter()
                    .map(|e| elems[y].iter().position(|t| t == m[e].as_str().unwrap()).unwrap())
                    .collect();
                maps.insert((x, y), img);
            }
            sheaves.insert(
                name.clone(),
                RawSheaf {
                    stalks: elems.iter().map(Vec::len).collect(),
                    maps,
                },
            );
        }
        RawModel { points, le, sheaves }
    }

    pub fn up(&self, x: usize) -> Vec<usize> {
        (0..self.points.len()).filter(|&y| self.le.contains(&(x, y))).collect()
    }

    pub fn set(&self, names: &[&str]) -> BTreeSet<usize> {
        names.iter().map(|n| self.points.iter().position(|p| p == n).unwrap()).collect()
    }

    /// Every family of stalkwise functions `f -> g` on the points of `over`,
    /// kept when it commutes with every listed restriction inside `over`.
    pub fn natural_families(&self, f: &RawSheaf, g: &RawSheaf, over: &[usize]) -> usize {
        let slots: Vec<(usize, usize)> = over.iter().flat_map(|&x| (0..f.stalks[x]).map(move |s| (x, s))).collect();
        if slots.iter().any(|&(x, _)| g.stalks[x] == 0) {
            return 0;
        }
        let mut choice = vec![0usize; slots.len()];
        let mut count = 0;
        loop {
            let phi = |x: usize, s: usize| choice[slots.iter().position(|&p| p == (x, s)).unwrap()];
            let natural = f.maps.iter().filter(|((x, y), _)| over.contains(x) && over.contains(y)).all(|(&(x, y), fm)| {
                (0..f.stalks[x]).all(|s| g.maps[&(x, y)][phi(x, s)] == phi(y, fm[s]))
            });
            if natural {
                count += 1;
            }
            let mut i = 0;
            loop {
                if i == slots.len() {
                    return count;
                }
                choice[i] += 1;
                if choice[i] < g.stalks[slots[i].0] {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }

    /// Compatible families of elements over the whole space.
    pub fn global_sections(&self, f: &RawSheaf) -> usize {
        let one = RawSheaf {
            stalks: vec![1; self.points.len()],
            maps: f.maps.keys().map(|&k| (k, vec![0])).collect(),
        };
        let all: Vec<usize> = (0..self.points.len()).collect();
        self.natural_families(&one, f, &all)
    }

    pub fn support(&self, f: &RawSheaf) -> BTreeSet<usize> {
        (0..self.points.len()).filter(|&x| f.stalks[x] > 0).collect()
    }

    /// Points whose up-set carries a natural family `f -> g`.
    pub fn hom_support(&self, f: &RawSheaf, g: &RawSheaf) -> BTreeSet<usize> {
        (0..self.points.len()).filter(|&x| self.natural_families(f, g, &self.up(x)) > 0).collect()
    }

    pub fn interior(&self, s: &BTreeSet<usize>) -> BTreeSet<usize> {
        (0..self.points.len()).filter(|&x| self.up(x).iter().all(|y| s.contains(y))).collect()
    }

    pub fn all(&self) -> BTreeSet<usize> {
        (0..self.points.len()).collect()
    }
}

/// A copy of a model file with every point name mapped through `to`.
pub fn rename_points(model: &Value, to: &BTreeMap<String, String>) -> Value {
    let name = |v: &Value| Value::String(to[v.as_str().unwrap()].clone());
    let key = |k: &str| match k.split_once("<=") {
        Some((x, y)) => format!("{}<={}", to[x], to[y]),
        None => to[k].clone(),
    };
    let rekey = |o: &Value| -> Value { Value::Object(o.as_object().unwrap().iter().map(|(k, v)| (key(k), v.clone())).collect()) };
    let mut out = model.clone();
    out["points"] = Value::Array(model["points"].as_array().unwrap().iter().map(name).collect());
    out["le"] = Value::Array(
        model["le"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| Value::Array(e.as_array().unwrap().iter().map(name).collect()))
            .collect(),
    );
    if let Some(atoms) = model["prob_atoms"].as_object() {
        for (a, table) in atoms {
            for (args, s) in table.as_object().unwrap() {
                out["prob_atoms"][a][args]["stalks"] = rekey(&s["stalks"]);
                out["prob_atoms"][a][args]["maps"] = rekey(&s["maps"]);
            }
        }
    }
    if let Some(atoms) = model["prop_atoms"].as_object() {
        for (a, table) in atoms {
            for (args, pts) in table.as_object().unwrap() {
                out["prop_atoms"][a][args] = Value::Array(pts.as_array().unwrap().iter().map(name).collect());
            }
        }
    }
    out
}

/// Every closed formula of the sort over the nullary atoms `p` and `a` with
/// at most `depth` nested connectives.
pub fn all_closed(sort: Sort, depth: usize) -> Vec<Formula> {
    let mut out = match sort {
        Sort::Problem => vec![Formula::prob("a", &[]), Formula::Bot],
        Sort::Proposition => vec![Formula::prop("p", &[]), Formula::True, Formula::False],
    };
    if depth == 0 {
        return out;
    }
    let sub = all_closed(sort, depth - 1);
    let other = match sort {
        Sort::Problem => Sort::Proposition,
        Sort::Proposition => Sort::Problem,
    };
    for f in all_closed(other, depth - 1) {
        out.push(match sort {
            Sort::Problem => Formula::bang(f),
            Sort::Proposition => Formula::quest(f),
        });
    }
    for l in &sub {
        for r in &sub {
            out.push(Formula::and(l.clone(), r.clone()));
            out.push(Formula::or(l.clone(), r.clone()));
            out.push(Formula::imp(l.clone(), r.clone()));
        }
    }
    out
}
