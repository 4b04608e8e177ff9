use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::model::SheafModelError;
use super::{Sheaf, SheafError};
use crate::set_models::{AtomTable, EvalError};
use crate::syntax::{Formula, Sort};
use crate::topology::{FiniteSpace, PointSet};

/// A presheaf of finite sets on the lattice of opens: a section set `0..size`
/// per open and a restriction map for every inclusion of opens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenPresheaf {
    space: Arc<FiniteSpace>,
    sizes: BTreeMap<PointSet, usize>,
    restrict: BTreeMap<(PointSet, PointSet), Vec<usize>>,
}

impl OpenPresheaf {
    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    /// Number of sections over the open `u`.
    pub fn size(&self, u: PointSet) -> usize {
        self.sizes[&u]
    }

    /// Restriction from `u` to an open `v` contained in it.
    pub fn restriction(&self, u: PointSet, v: PointSet) -> &[usize] {
        &self.restrict[&(u, v)]
    }

    fn pairs(space: &FiniteSpace) -> Vec<(PointSet, PointSet)> {
        let opens = space.opens();
        let mut out = Vec::new();
        for &u in &opens {
            for &v in &opens {
                if v.is_subset(u) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// The presheaf of sections of a sheaf.
    pub fn sections_of(f: &Sheaf) -> OpenPresheaf {
        let sp = f.space().clone();
        let mut secs = BTreeMap::new();
        for u in sp.opens() {
            secs.insert(u, f.sections(u).expect("opens are open"));
        }
        let sizes = secs.iter().map(|(u, s)| (*u, s.len())).collect();
        let mut restrict = BTreeMap::new();
        for (u, v) in OpenPresheaf::pairs(&sp) {
            let idx: HashMap<Vec<Option<usize>>, usize> =
                secs[&v].iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
            let m = secs[&u]
                .iter()
                .map(|s| {
                    let cut: Vec<Option<usize>> =
                        (0..sp.len()).map(|x| if v.contains(x) { s[x] } else { None }).collect();
                    idx[&cut]
                })
                .collect();
            restrict.insert((u, v), m);
        }
        OpenPresheaf {
            space: sp,
            sizes,
            restrict,
        }
    }

    /// The sheaf with stalk `P(↑x)` at `x`.
    pub fn sheafify(&self) -> Sheaf {
        let sp = &self.space;
        let stalks = (0..sp.len()).map(|x| self.size(sp.up(x))).collect();
        let covers = sp
            .cover_pairs()
            .into_iter()
            .map(|(x, y)| ((x, y), self.restriction(sp.up(x), sp.up(y)).to_vec()))
            .collect();
        Sheaf::from_cover_maps(sp.clone(), stalks, &covers).expect("restrictions compose")
    }

    /// Gluing along the cover of every open `U` by the minimal opens `↑x`,
    /// `x` in `U`: compatible families must correspond exactly to sections over `U`.
    pub fn is_sheaf(&self) -> bool {
        let sp = &self.space;
        for u in sp.opens() {
            let pts: Vec<usize> = u.iter().collect();
            let mut families: Vec<Vec<usize>> = vec![Vec::new()];
            for (i, &x) in pts.iter().enumerate() {
                let ux = sp.up(x);
                let mut next = Vec::new();
                for fam in &families {
                    for s in 0..self.size(ux) {
                        let ok = pts[..i].iter().zip(fam).all(|(&y, &t)| {
                            let w = ux & sp.up(y);
                            self.restriction(ux, w)[s] == self.restriction(sp.up(y), w)[t]
                        });
                        if ok {
                            let mut f = fam.clone();
                            f.push(s);
                            next.push(f);
                        }
                    }
                }
                families = next;
            }
            if families.len() != self.size(u) {
                return false;
            }
            let mut images: Vec<Vec<usize>> = (0..self.size(u))
                .map(|s| pts.iter().map(|&x| self.restriction(u, sp.up(x))[s]).collect())
                .collect();
            images.sort();
            images.dedup();
            if images.len() != self.size(u) {
                return false;
            }
        }
        true
    }

    fn objectwise(
        &self,
        other: &OpenPresheaf,
        size: impl Fn(PointSet, usize, usize) -> usize,
        map: impl Fn(&[usize], &[usize], usize, usize) -> Vec<usize>,
    ) -> Result<OpenPresheaf, SheafError> {
        if *self.space != *other.space {
            return Err(SheafError::BaseMismatch);
        }
        let sizes = self
            .sizes
            .iter()
            .map(|(&u, &a)| (u, size(u, a, other.size(u))))
            .collect();
        let mut restrict = BTreeMap::new();
        for (&(u, v), m) in &self.restrict {
            restrict.insert((u, v), map(m, other.restriction(u, v), self.size(v), other.size(v)));
        }
        let mut p = OpenPresheaf {
            space: self.space.clone(),
            sizes,
            restrict,
        };
        p.fix_empty();
        Ok(p)
    }

    /// Keeps a single section over the empty open.
    fn fix_empty(&mut self) {
        let e = PointSet::EMPTY;
        self.sizes.insert(e, 1);
        for ((_, v), m) in self.restrict.iter_mut() {
            if *v == e {
                m.iter_mut().for_each(|t| *t = 0);
            }
        }
        self.restrict.insert((e, e), vec![0]);
    }

    /// Objectwise product.
    pub fn product(&self, other: &OpenPresheaf) -> Result<OpenPresheaf, SheafError> {
        self.objectwise(
            other,
            |_, a, b| a * b,
            |f, g, _, gv| f.iter().flat_map(|&a| g.iter().map(move |&b| a * gv + b)).collect(),
        )
    }

    /// Objectwise disjoint union over nonempty opens. Unlike the sheaf
    /// coproduct, sections over an open never mix summands.
    pub fn coproduct(&self, other: &OpenPresheaf) -> Result<OpenPresheaf, SheafError> {
        self.objectwise(
            other,
            |_, a, b| a + b,
            |f, g, fv, _| f.iter().copied().chain(g.iter().map(|&b| fv + b)).collect(),
        )
    }

    /// Natural transformations `self|U -> other|U` for every open `U`,
    /// restricted by truncation.
    pub fn hom(&self, other: &OpenPresheaf, budget: usize) -> Result<OpenPresheaf, SheafError> {
        let sp = self.space.clone();
        let opens = sp.opens();
        let mut fams: BTreeMap<PointSet, Vec<BTreeMap<PointSet, Vec<usize>>>> = BTreeMap::new();
        for &u in &opens {
            let mut below: Vec<PointSet> = opens.iter().copied().filter(|v| v.is_subset(u)).collect();
            below.sort_by_key(|v| std::cmp::Reverse(v.len()));
            let mut out = Vec::new();
            let mut cur: BTreeMap<PointSet, Vec<usize>> = BTreeMap::new();
            self.hom_search(other, &below, 0, &mut cur, &mut out, budget)?;
            fams.insert(u, out);
        }
        let sizes = fams.iter().map(|(u, f)| (*u, f.len())).collect();
        let mut restrict = BTreeMap::new();
        for (u, v) in OpenPresheaf::pairs(&sp) {
            let m = fams[&u]
                .iter()
                .map(|fam| {
                    let cut: BTreeMap<PointSet, Vec<usize>> =
                        fam.iter().filter(|(w, _)| w.is_subset(v)).map(|(w, t)| (*w, t.clone())).collect();
                    fams[&v].iter().position(|g| *g == cut).expect("truncation is natural")
                })
                .collect();
            restrict.insert((u, v), m);
        }
        Ok(OpenPresheaf {
            space: sp,
            sizes,
            restrict,
        })
    }

    fn hom_search(
        &self,
        other: &OpenPresheaf,
        opens: &[PointSet],
        k: usize,
        cur: &mut BTreeMap<PointSet, Vec<usize>>,
        out: &mut Vec<BTreeMap<PointSet, Vec<usize>>>,
        budget: usize,
    ) -> Result<(), SheafError> {
        let Some(&v) = opens.get(k) else {
            if out.len() >= budget {
                return Err(SheafError::Budget {
                    what: "presheaf Hom",
                    limit: budget,
                });
            }
            out.push(cur.clone());
            return Ok(());
        };
        let (a, b) = (self.size(v), other.size(v));
        let total = if a == 0 { 1 } else { b.pow(a as u32) };
        for mut code in 0..total {
            let mut phi = Vec::with_capacity(a);
            for _ in 0..a {
                phi.push(code % b);
                code /= b;
            }
            let natural = cur.iter().all(|(&w, psi)| {
                !v.is_subset(w)
                    || (0..self.size(w)).all(|s| {
                        other.restriction(w, v)[psi[s]] == phi[self.restriction(w, v)[s]]
                    })
            });
            if natural {
                cur.insert(v, phi);
                self.hom_search(other, opens, k + 1, cur, out, budget)?;
                cur.remove(&v);
            }
        }
        Ok(())
    }

    /// `Char U`: one section over every open contained in `u`, none elsewhere.
    pub fn characteristic(space: &Arc<FiniteSpace>, u: PointSet) -> OpenPresheaf {
        let sizes = space.opens().into_iter().map(|v| (v, usize::from(v.is_subset(u)))).collect::<BTreeMap<_, _>>();
        let restrict = OpenPresheaf::pairs(space)
            .into_iter()
            .map(|(v, w)| ((v, w), vec![0; sizes[&v]]))
            .collect();
        OpenPresheaf {
            space: space.clone(),
            sizes,
            restrict,
        }
    }

    /// Points `x` with a section over `↑x`.
    pub fn support(&self) -> PointSet {
        PointSet::from_indices((0..self.space.len()).filter(|&x| self.size(self.space.up(x)) > 0))
    }
}

/// Presheaf semantics for the fragment without `\/` and `exists`.
#[derive(Clone, Debug)]
pub struct PresheafModel {
    pub space: Arc<FiniteSpace>,
    pub domain_size: usize,
    pub problems: BTreeMap<String, (usize, Vec<OpenPresheaf>)>,
    pub propositions: BTreeMap<String, AtomTable>,
    pub hom_budget: usize,
}

impl PresheafModel {
    pub fn new(space: Arc<FiniteSpace>, domain_size: usize) -> PresheafModel {
        PresheafModel {
            space,
            domain_size,
            problems: BTreeMap::new(),
            propositions: BTreeMap::new(),
            hom_budget: super::DEFAULT_HOM_BUDGET,
        }
    }

    pub fn with_problem(mut self, name: &str, p: OpenPresheaf) -> PresheafModel {
        self.problems.insert(name.to_string(), (0, vec![p]));
        self
    }

    pub fn with_proposition(mut self, name: &str, s: PointSet) -> PresheafModel {
        self.propositions.insert(name.to_string(), AtomTable::constant(s));
        self
    }

    fn index(&self, args: &[String], env: &[(String, usize)]) -> Result<usize, EvalError> {
        let mut idx = 0;
        for a in args {
            let d = env
                .iter()
                .rev()
                .find(|(k, _)| k == a)
                .map(|(_, d)| *d)
                .ok_or_else(|| EvalError::Unbound(a.clone()))?;
            idx = idx * self.domain_size + d;
        }
        Ok(idx)
    }

    fn unsupported(f: &Formula) -> SheafModelError {
        EvalError::IllSorted(format!("presheaf semantics covers only formulas without \\/ and exists; got `{f}`")).into()
    }

    pub fn problem(&self, f: &Formula, env: &mut Vec<(String, usize)>) -> Result<OpenPresheaf, SheafModelError> {
        let sp = &self.space;
        Ok(match f {
            Formula::Atom(a) => {
                let (arity, vals) = self.problems.get(&a.name).ok_or_else(|| EvalError::UnknownAtom(a.name.clone()))?;
                if *arity != a.args.len() {
                    return Err(EvalError::Arity {
                        name: a.name.clone(),
                        model: *arity,
                        used: a.args.len(),
                    }
                    .into());
                }
                vals[self.index(&a.args, env)?].clone()
            }
            Formula::Bot => OpenPresheaf::characteristic(sp, PointSet::EMPTY),
            Formula::And(l, r) => self.problem(l, env)?.product(&self.problem(r, env)?)?,
            Formula::Imp(l, r) => self.problem(l, env)?.hom(&self.problem(r, env)?, self.hom_budget)?,
            Formula::Forall(v, b) => {
                let mut acc = OpenPresheaf::characteristic(sp, sp.full());
                for d in 0..self.domain_size {
                    env.push((v.clone(), d));
                    let r = self.problem(b, env);
                    env.pop();
                    acc = acc.product(&r?)?;
                }
                acc
            }
            Formula::Bang(p) => OpenPresheaf::characteristic(sp, sp.interior(self.proposition(p, env)?)),
            _ => return Err(PresheafModel::unsupported(f)),
        })
    }

    pub fn proposition(&self, f: &Formula, env: &mut Vec<(String, usize)>) -> Result<PointSet, SheafModelError> {
        let sp = &self.space;
        Ok(match f {
            Formula::Atom(a) => {
                let t = self.propositions.get(&a.name).ok_or_else(|| EvalError::UnknownAtom(a.name.clone()))?;
                t.values[self.index(&a.args, env)?]
            }
            Formula::True => sp.full(),
            Formula::False => PointSet::EMPTY,
            Formula::And(l, r) => self.proposition(l, env)? & self.proposition(r, env)?,
            Formula::Imp(l, r) => sp.complement(self.proposition(l, env)?) | self.proposition(r, env)?,
            Formula::Forall(v, b) => {
                let mut acc = sp.full();
                for d in 0..self.domain_size {
                    env.push((v.clone(), d));
                    let r = self.proposition(b, env);
                    env.pop();
                    acc = acc & r?;
                }
                acc
            }
            Formula::Quest(a) => self.problem(a, env)?.support(),
            _ => return Err(PresheafModel::unsupported(f)),
        })
    }

    /// Validity of a closed formula: a section over the whole space, or the whole space.
    pub fn valid(&self, f: &Formula) -> Result<bool, SheafModelError> {
        let full = self.space.full();
        Ok(match f.sort_of() {
            Sort::Problem => self.problem(f, &mut Vec::new())?.size(full) > 0,
            Sort::Proposition => self.proposition(f, &mut Vec::new())? == full,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheaf::{enumerate_sheaves, SheafModel};
    use crate::syntax::parse_inferred;
    use crate::topology::named;

    fn chi(sp: &Arc<FiniteSpace>, p: &[&str]) -> Sheaf {
        Sheaf::characteristic(sp, sp.set_of(p).unwrap()).unwrap()
    }

    #[test]
    fn sections_of_characteristic() {
        let sp = Arc::new(named::i3());
        let u = sp.set_of(&["l", "m"]).unwrap();
        let p = OpenPresheaf::sections_of(&chi(&sp, &["l", "m"]));
        for v in sp.opens() {
            assert_eq!(p.size(v), usize::from(v.is_subset(u)));
        }
        assert_eq!(p, OpenPresheaf::characteristic(&sp, u));
    }

    #[test]
    fn presheaf_coproduct_versus_sheaf_coproduct() {
        let sp = Arc::new(named::i3());
        let a = OpenPresheaf::sections_of(&chi(&sp, &["l", "m"]));
        let b = OpenPresheaf::sections_of(&chi(&sp, &["r", "m"]));
        let c = a.coproduct(&b).unwrap();
        assert_eq!(c.size(sp.full()), 0);
        let s = c.sheafify();
        let direct = chi(&sp, &["l", "m"]).coproduct(&chi(&sp, &["r", "m"])).unwrap();
        assert!(s.is_isomorphic(&direct));
        assert!(!s.has_global_section());
        assert!(c.is_sheaf());
        let v = Arc::new(named::v3());
        let t1 = OpenPresheaf::sections_of(&chi(&v, &["t1"]));
        let t2 = OpenPresheaf::sections_of(&chi(&v, &["t2"]));
        let d = t1.coproduct(&t2).unwrap();
        assert!(!d.is_sheaf());
        let top = v.set_of(&["t1", "t2"]).unwrap();
        assert_eq!(d.size(top), 0);
        assert_eq!(OpenPresheaf::sections_of(&d.sheafify()).size(top), 1);
    }

    #[test]
    fn sections_presheaf_is_a_sheaf_and_sheafify_inverts() {
        let sp = Arc::new(named::b4());
        for f in enumerate_sheaves(&sp, 2).iter().step_by(7) {
            let p = OpenPresheaf::sections_of(f);
            assert!(p.is_sheaf());
            assert!(p.sheafify().is_isomorphic(f));
            let twice = OpenPresheaf::sections_of(&p.sheafify()).sheafify();
            assert!(twice.is_isomorphic(&p.sheafify()));
        }
    }

    #[test]
    fn presheaf_and_sheaf_validity_agree_without_disjunction() {
        let sp = Arc::new(named::i3());
        let f = chi(&sp, &["l", "m"]).coproduct(&chi(&sp, &["r", "m"])).unwrap();
        let g = chi(&sp, &["m"]);
        let sm = SheafModel::new(sp.clone(), 1).with_problem("a", f.clone()).with_problem("b", g.clone());
        let pm = PresheafModel::new(sp.clone(), 1)
            .with_problem("a", OpenPresheaf::sections_of(&f))
            .with_problem("b", OpenPresheaf::sections_of(&g));
        for s in ["a -> b", "b -> a", "(a -> b) -> b", "((a -> b) -> a) -> a", "a /\\ b -> bot", "!?a -> a", "!?a"] {
            let fm = parse_inferred(s).unwrap().map_atoms(&mut |at| Formula::prob(&at.name, &[]));
            assert_eq!(pm.valid(&fm).unwrap(), sm.valid(&fm).unwrap(), "{s}");
        }
        let or = Formula::or(Formula::prob("a", &[]), Formula::prob("b", &[]));
        assert!(pm.valid(&or).is_err());
    }
}
