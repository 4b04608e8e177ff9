//! Sheaves of finite sets on finite Alexandrov spaces, presented as stalk
//! functors on the underlying poset, and the sheaf semantics of QHC.

mod enumerate;
mod model;
mod presheaf;
mod search;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{FiniteSpace, PointSet};

pub use enumerate::enumerate_sheaves;
pub use model::{SheafModel, SheafModelError, SheafTable, Value};
pub use presheaf::{OpenPresheaf, PresheafModel};
pub use search::Section;

/// Upper bound on the stalk size of a materialised `Hom` sheaf.
pub const DEFAULT_HOM_BUDGET: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SheafError {
    #[error("sheaves live on different spaces")]
    BaseMismatch,
    #[error("set {0:?} is not open")]
    NotOpen(PointSet),
    #[error("expected {expected} stalks, got {found}")]
    StalkCount { expected: usize, found: usize },
    #[error("map {from}<={to}: {reason}")]
    BadMap {
        from: String,
        to: String,
        reason: String,
    },
    #[error("restrictions are not functorial: {x}<={y}<={z} composes differently from {x}<={z}")]
    NotFunctorial { x: String, y: String, z: String },
    #[error("{what} exceeds the budget of {limit} elements")]
    Budget { what: &'static str, limit: usize },
    #[error("invalid sheaf JSON: {0}")]
    Json(String),
}

/// A sheaf of finite sets: a stalk `0..stalks[x]` at every point and, for
/// every `x <= y`, a restriction map from the stalk at `x` to the stalk at `y`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Sheaf {
    space: Arc<FiniteSpace>,
    stalks: Vec<usize>,
    /// `maps[x * n + y]` for `x <= y`; empty otherwise.
    maps: Vec<Vec<usize>>,
}

impl fmt::Debug for Sheaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sp = &self.space;
        write!(f, "Sheaf{{")?;
        for x in 0..sp.len() {
            write!(f, "{}:{} ", sp.name(x), self.stalks[x])?;
        }
        for (x, y) in sp.cover_pairs() {
            if self.stalks[x] > 0 {
                write!(f, "{}<={}:{:?} ", sp.name(x), sp.name(y), self.map(x, y))?;
            }
        }
        write!(f, "}}")
    }
}

impl Sheaf {
    fn n(&self) -> usize {
        self.space.len()
    }

    /// Builds a sheaf from its maps along cover pairs; the remaining maps are
    /// composites, and all composites are checked to agree.
    pub fn from_cover_maps(
        space: Arc<FiniteSpace>,
        stalks: Vec<usize>,
        covers: &BTreeMap<(usize, usize), Vec<usize>>,
    ) -> Result<Sheaf, SheafError> {
        let n = space.len();
        if stalks.len() != n {
            return Err(SheafError::StalkCount {
                expected: n,
                found: stalks.len(),
            });
        }
        let name = |i: usize| space.name(i).to_string();
        for &(x, y) in &space.cover_pairs() {
            let m = covers.get(&(x, y)).map(Vec::as_slice).unwrap_or(&[]);
            if m.len() != stalks[x] {
                return Err(SheafError::BadMap {
                    from: name(x),
                    to: name(y),
                    reason: format!("expected {} entries, got {}", stalks[x], m.len()),
                });
            }
            if let Some(&t) = m.iter().find(|&&t| t >= stalks[y]) {
                return Err(SheafError::BadMap {
                    from: name(x),
                    to: name(y),
                    reason: format!("image {t} outside a stalk of size {}", stalks[y]),
                });
            }
        }
        let order = space.linear_extension();
        let covers_into: Vec<Vec<usize>> = (0..n)
            .map(|z| space.cover_pairs().into_iter().filter(|&(_, b)| b == z).map(|(a, _)| a).collect())
            .collect();
        let mut maps = vec![Vec::new(); n * n];
        for x in 0..n {
            maps[x * n + x] = (0..stalks[x]).collect();
            for &z in &order {
                if z == x || !space.le(x, z) {
                    continue;
                }
                let w = *covers_into[z]
                    .iter()
                    .find(|&&w| space.le(x, w))
                    .expect("a point strictly above x has a cover above x");
                let step = &covers[&(w, z)];
                maps[x * n + z] = maps[x * n + w].iter().map(|&s| step[s]).collect();
            }
        }
        let sheaf = Sheaf {
            space,
            stalks,
            maps,
        };
        sheaf.check_functorial()?;
        Ok(sheaf)
    }

    fn check_functorial(&self) -> Result<(), SheafError> {
        let sp = &*self.space;
        let n = self.n();
        for x in 0..n {
            for y in sp.up(x).iter() {
                for z in sp.up(y).iter() {
                    let direct = self.map(x, z);
                    let via = self.map(x, y).iter().map(|&s| self.map(y, z)[s]);
                    if !via.eq(direct.iter().copied()) {
                        return Err(SheafError::NotFunctorial {
                            x: sp.name(x).into(),
                            y: sp.name(y).into(),
                            z: sp.name(z).into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn stalk(&self, x: usize) -> usize {
        self.stalks[x]
    }

    pub fn stalks(&self) -> &[usize] {
        &self.stalks
    }

    /// Restriction map from the stalk at `x` to the stalk at `y`; requires `x <= y`.
    pub fn map(&self, x: usize, y: usize) -> &[usize] {
        &self.maps[x * self.n() + y]
    }

    /// The constant sheaf with one element on the open `u`, empty elsewhere.
    pub fn characteristic(space: &Arc<FiniteSpace>, u: PointSet) -> Result<Sheaf, SheafError> {
        if !space.is_open(u) {
            return Err(SheafError::NotOpen(u));
        }
        let n = space.len();
        let stalks: Vec<usize> = (0..n).map(|x| usize::from(u.contains(x))).collect();
        let mut maps = vec![Vec::new(); n * n];
        for x in 0..n {
            for y in space.up(x).iter() {
                maps[x * n + y] = vec![0; stalks[x]];
            }
        }
        Ok(Sheaf {
            space: space.clone(),
            stalks,
            maps,
        })
    }

    pub fn empty(space: &Arc<FiniteSpace>) -> Sheaf {
        Sheaf::characteristic(space, PointSet::EMPTY).expect("empty set is open")
    }

    pub fn terminal(space: &Arc<FiniteSpace>) -> Sheaf {
        Sheaf::characteristic(space, space.full()).expect("whole space is open")
    }

    /// Points with a nonempty stalk; always an open set.
    pub fn support(&self) -> PointSet {
        PointSet::from_indices((0..self.n()).filter(|&x| self.stalks[x] > 0))
    }

    fn same_base(&self, other: &Sheaf) -> Result<(), SheafError> {
        if Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space {
            Ok(())
        } else {
            Err(SheafError::BaseMismatch)
        }
    }

    fn combine(
        &self,
        other: &Sheaf,
        stalk: impl Fn(usize, usize) -> usize,
        elem: impl Fn(&[usize], &[usize], usize, usize) -> Vec<usize>,
    ) -> Result<Sheaf, SheafError> {
        self.same_base(other)?;
        let n = self.n();
        let stalks: Vec<usize> = (0..n).map(|x| stalk(self.stalks[x], other.stalks[x])).collect();
        let mut maps = vec![Vec::new(); n * n];
        for x in 0..n {
            for y in self.space.up(x).iter() {
                maps[x * n + y] = elem(self.map(x, y), other.map(x, y), self.stalks[y], other.stalks[y]);
            }
        }
        Ok(Sheaf {
            space: self.space.clone(),
            stalks,
            maps,
        })
    }

    /// Stalkwise product; the pair `(a, b)` is encoded as `a * |G(x)| + b`.
    pub fn product(&self, other: &Sheaf) -> Result<Sheaf, SheafError> {
        self.combine(
            other,
            |a, b| a * b,
            |f, g, _, gy| {
                let mut v = Vec::with_capacity(f.len() * g.len());
                for &a in f {
                    for &b in g {
                        v.push(a * gy + b);
                    }
                }
                v
            },
        )
    }

    /// Stalkwise disjoint union; elements of `other` follow those of `self`.
    pub fn coproduct(&self, other: &Sheaf) -> Result<Sheaf, SheafError> {
        self.combine(
            other,
            |a, b| a + b,
            |f, g, fy, _| f.iter().copied().chain(g.iter().map(|&b| fy + b)).collect(),
        )
    }

    pub fn product_all<'a>(space: &Arc<FiniteSpace>, items: impl IntoIterator<Item = &'a Sheaf>) -> Result<Sheaf, SheafError> {
        items
            .into_iter()
            .try_fold(Sheaf::terminal(space), |acc, s| acc.product(s))
    }

    pub fn coproduct_all<'a>(space: &Arc<FiniteSpace>, items: impl IntoIterator<Item = &'a Sheaf>) -> Result<Sheaf, SheafError> {
        items
            .into_iter()
            .try_fold(Sheaf::empty(space), |acc, s| acc.coproduct(s))
    }

    /// The sheaf of natural families: its stalk at `x` is the set of natural
    /// transformations `F|↑x -> G|↑x`, restricted by truncation.
    pub fn hom(&self, other: &Sheaf, budget: usize) -> Result<Sheaf, SheafError> {
        self.same_base(other)?;
        let sp = self.space.clone();
        let n = self.n();
        let mut families: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n);
        let mut index: Vec<HashMap<Vec<usize>, usize>> = Vec::with_capacity(n);
        for x in 0..n {
            let fams = search::all_morphisms(self, other, sp.up(x), budget)?;
            let idx = fams.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
            families.push(fams);
            index.push(idx);
        }
        let mut maps = vec![Vec::new(); n * n];
        for x in 0..n {
            let ux = sp.up(x);
            for y in ux.iter() {
                let keep = search::truncation_plan(self, ux, sp.up(y));
                maps[x * n + y] = families[x]
                    .iter()
                    .map(|fam| {
                        let cut: Vec<usize> = keep.iter().flat_map(|r| fam[r.clone()].iter().copied()).collect();
                        index[y][&cut]
                    })
                    .collect();
            }
        }
        Ok(Sheaf {
            space: sp,
            stalks: families.iter().map(Vec::len).collect(),
            maps,
        })
    }

    /// Whether some natural transformation `self -> other` over the open `u` exists.
    pub fn has_morphism(&self, other: &Sheaf, u: PointSet) -> Result<bool, SheafError> {
        self.same_base(other)?;
        Ok(search::morphism_exists(self, other, u))
    }

    /// All compatible families of elements over the open `u`.
    pub fn sections(&self, u: PointSet) -> Result<Vec<Section>, SheafError> {
        if !self.space.is_open(u) {
            return Err(SheafError::NotOpen(u));
        }
        search::sections(self, u, usize::MAX)
    }

    pub fn has_section(&self, u: PointSet) -> Result<bool, SheafError> {
        if !self.space.is_open(u) {
            return Err(SheafError::NotOpen(u));
        }
        Ok(search::morphism_exists(&Sheaf::terminal(&self.space), self, u))
    }

    pub fn has_global_section(&self) -> bool {
        search::morphism_exists(&Sheaf::terminal(&self.space), self, self.space.full())
    }

    /// Whether the two sheaves are isomorphic.
    pub fn is_isomorphic(&self, other: &Sheaf) -> bool {
        self.same_base(other).is_ok()
            && self.stalks == other.stalks
            && search::isomorphism(self, other).is_some()
    }

    /// Relabels stalk elements: `perm[x][old] = new`.
    pub(crate) fn relabel(&self, perm: &[Vec<usize>]) -> Sheaf {
        let n = self.n();
        let mut maps = vec![Vec::new(); n * n];
        for x in 0..n {
            for y in self.space.up(x).iter() {
                let old = self.map(x, y);
                let mut m = vec![0; old.len()];
                for (s, &t) in old.iter().enumerate() {
                    m[perm[x][s]] = perm[y][t];
                }
                maps[x * n + y] = m;
            }
        }
        Sheaf {
            space: self.space.clone(),
            stalks: self.stalks.clone(),
            maps,
        }
    }

    /// Stalk sizes followed by the cover maps: determines the sheaf.
    pub(crate) fn code(&self) -> Vec<usize> {
        let mut c = self.stalks.clone();
        for (x, y) in self.space.cover_pairs() {
            c.extend_from_slice(self.map(x, y));
        }
        c
    }

    /// JSON form: `{"stalks":{"l":["s0"]},"maps":{"l<=m":{"s0":"t0"}}}`.
    pub fn to_json(&self) -> SheafJson {
        let sp = &self.space;
        let label = |i: usize| format!("s{i}");
        let stalks = (0..sp.len())
            .map(|x| (sp.name(x).to_string(), (0..self.stalks[x]).map(label).collect()))
            .collect();
        let maps = sp
            .cover_pairs()
            .into_iter()
            .filter(|&(x, _)| self.stalks[x] > 0)
            .map(|(x, y)| {
                let m = self
                    .map(x, y)
                    .iter()
                    .enumerate()
                    .map(|(s, &t)| (label(s), label(t)))
                    .collect();
                (format!("{}<={}", sp.name(x), sp.name(y)), m)
            })
            .collect();
        SheafJson { stalks, maps }
    }

    /// Reads the JSON form. Maps must be given on cover pairs; maps given on
    /// other comparable pairs are checked against the composites.
    pub fn from_json(space: &Arc<FiniteSpace>, j: &SheafJson) -> Result<Sheaf, SheafError> {
        let n = space.len();
        let mut labels: Vec<Vec<String>> = vec![Vec::new(); n];
        for (name, elems) in &j.stalks {
            let x = space
                .index_of(name)
                .ok_or_else(|| SheafError::Json(format!("unknown point `{name}`")))?;
            labels[x] = elems.clone();
        }
        let stalks: Vec<usize> = labels.iter().map(Vec::len).collect();
        let mut given: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (key, m) in &j.maps {
            let (a, b) = key
                .split_once("<=")
                .ok_or_else(|| SheafError::Json(format!("map key `{key}` is not of the form x<=y")))?;
            let x = space
                .index_of(a.trim())
                .ok_or_else(|| SheafError::Json(format!("unknown point `{a}`")))?;
            let y = space
                .index_of(b.trim())
                .ok_or_else(|| SheafError::Json(format!("unknown point `{b}`")))?;
            if !space.le(x, y) {
                return Err(SheafError::Json(format!("`{key}` is not a comparable pair")));
            }
            let mut v = vec![usize::MAX; stalks[x]];
            for (s, t) in m {
                let si = labels[x].iter().position(|l| l == s);
                let ti = labels[y].iter().position(|l| l == t);
                match (si, ti) {
                    (Some(si), Some(ti)) => v[si] = ti,
                    _ => {
                        return Err(SheafError::BadMap {
                            from: a.trim().into(),
                            to: b.trim().into(),
                            reason: format!("unknown element in `{s}` -> `{t}`"),
                        })
                    }
                }
            }
            if v.contains(&usize::MAX) {
                return Err(SheafError::BadMap {
                    from: a.trim().into(),
                    to: b.trim().into(),
                    reason: "map is not total".into(),
                });
            }
            given.insert((x, y), v);
        }
        for (x, y) in space.cover_pairs() {
            if stalks[x] == 0 {
                given.entry((x, y)).or_default();
            }
        }
        let sheaf = Sheaf::from_cover_maps(space.clone(), stalks, &given)?;
        for (&(x, y), m) in &given {
            if sheaf.map(x, y) != m.as_slice() {
                let z = space
                    .cover_pairs()
                    .into_iter()
                    .find(|&(a, b)| a == x && space.le(b, y))
                    .map(|(_, b)| b)
                    .unwrap_or(y);
                return Err(SheafError::NotFunctorial {
                    x: space.name(x).into(),
                    y: space.name(z).into(),
                    z: space.name(y).into(),
                });
            }
        }
        Ok(sheaf)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheafJson {
    pub stalks: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub maps: BTreeMap<String, BTreeMap<String, String>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::named;

    fn i3() -> Arc<FiniteSpace> {
        Arc::new(named::i3())
    }

    fn chi(sp: &Arc<FiniteSpace>, pts: &[&str]) -> Sheaf {
        Sheaf::characteristic(sp, sp.set_of(pts).unwrap()).unwrap()
    }

    #[test]
    fn characteristic_sections() {
        let sp = i3();
        let u = sp.set_of(&["l", "m"]).unwrap();
        let c = Sheaf::characteristic(&sp, u).unwrap();
        assert_eq!(c.sections(u).unwrap().len(), 1);
        assert_eq!(c.support(), u);
        assert!(Sheaf::characteristic(&sp, sp.set_of(&["l"]).unwrap()).is_err());
    }

    #[test]
    fn two_branches_have_no_global_section() {
        let sp = i3();
        let f = chi(&sp, &["l", "m"]).coproduct(&chi(&sp, &["r", "m"])).unwrap();
        assert_eq!(f.stalk(sp.index_of("m").unwrap()), 2);
        assert_eq!(f.support(), sp.full());
        assert!(f.sections(sp.full()).unwrap().is_empty());
        assert!(!f.has_global_section());
        assert_eq!(f.sections(sp.set_of(&["l", "m"]).unwrap()).unwrap().len(), 1);
    }

    #[test]
    fn units_and_zeros() {
        let sp = i3();
        let f = chi(&sp, &["l", "m"]).coproduct(&chi(&sp, &["r", "m"])).unwrap();
        assert!(f.product(&Sheaf::terminal(&sp)).unwrap().is_isomorphic(&f));
        assert_eq!(f.product(&Sheaf::empty(&sp)).unwrap(), Sheaf::empty(&sp));
        assert!(!f.is_isomorphic(&Sheaf::terminal(&sp)));
    }

    #[test]
    fn hom_of_characteristics() {
        let sp = i3();
        let h = chi(&sp, &["l", "m"]).hom(&chi(&sp, &["r", "m"]), DEFAULT_HOM_BUDGET).unwrap();
        assert!(h.is_isomorphic(&chi(&sp, &["r", "m"])));
        let e = Sheaf::empty(&sp).hom(&Sheaf::empty(&sp), DEFAULT_HOM_BUDGET).unwrap();
        assert!(e.is_isomorphic(&Sheaf::terminal(&sp)));
    }

    #[test]
    fn hom_on_diamond_has_no_stalk_at_bottom() {
        let sp = Arc::new(named::b4());
        let f = chi(&sp, &["l", "m", "r"]);
        let g = chi(&sp, &["l", "m"]).coproduct(&chi(&sp, &["r", "m"])).unwrap();
        let h = f.hom(&g, DEFAULT_HOM_BUDGET).unwrap();
        assert_eq!(h.stalk(sp.index_of("b").unwrap()), 0);
        assert_eq!(h.support(), sp.set_of(&["l", "m", "r"]).unwrap());
        assert!(f.support().is_subset(g.support()));
    }

    #[test]
    fn cover_map_construction_and_errors() {
        let sp = i3();
        let (l, m, r) = (0, 1, 2);
        let mut covers = BTreeMap::new();
        covers.insert((l, m), vec![0]);
        covers.insert((r, m), vec![1]);
        let f = Sheaf::from_cover_maps(sp.clone(), vec![1, 2, 1], &covers).unwrap();
        assert!(f.is_isomorphic(&chi(&sp, &["l", "m"]).coproduct(&chi(&sp, &["r", "m"])).unwrap()));
        covers.insert((r, m), vec![2]);
        assert!(matches!(
            Sheaf::from_cover_maps(sp.clone(), vec![1, 2, 1], &covers),
            Err(SheafError::BadMap { .. })
        ));
        covers.insert((l, m), vec![]);
        assert!(Sheaf::from_cover_maps(sp, vec![1, 0, 1], &covers).is_err());
    }

    #[test]
    fn json_round_trip_and_functoriality_report() {
        let sp = Arc::new(named::chain(3));
        let j: SheafJson = serde_json::from_str(
            r#"{"stalks":{"c0":["a","b"],"c1":["u","v"],"c2":["z"]},
                "maps":{"c0<=c1":{"a":"u","b":"v"},"c1<=c2":{"u":"z","v":"z"}}}"#,
        )
        .unwrap();
        let f = Sheaf::from_json(&sp, &j).unwrap();
        assert_eq!(Sheaf::from_json(&sp, &f.to_json()).unwrap(), f);
        let mut bad = j.clone();
        bad.maps.insert(
            "c0<=c2".into(),
            [("a".to_string(), "z".to_string())].into_iter().collect(),
        );
        let err = Sheaf::from_json(&sp, &bad).unwrap_err();
        assert!(matches!(err, SheafError::BadMap { .. }), "{err}");
    }
}
