use std::collections::BTreeSet;
use std::ops::Range;

use super::{Sheaf, SheafError};
use crate::topology::PointSet;

/// A compatible family over an open set: the chosen element at each point of
/// the set, `None` outside it.
pub type Section = Vec<Option<usize>>;

const UNSET: usize = usize::MAX;

/// Backtracking search for natural transformations `f -> g` over an open set.
///
/// Points are visited bottom-up. Choosing the image of `s` at `x` fixes the
/// image of every restriction of `s` above `x`, which prunes most branches.
struct Engine<'a> {
    f: &'a Sheaf,
    g: &'a Sheaf,
    above: Vec<Vec<usize>>,
    phi: Vec<Vec<usize>>,
    used: Option<Vec<Vec<bool>>>,
    vars: Vec<(usize, usize)>,
    trail: Vec<(usize, usize)>,
}

impl<'a> Engine<'a> {
    fn new(f: &'a Sheaf, g: &'a Sheaf, u: PointSet, injective: bool, dedupe: bool) -> Engine<'a> {
        let sp = f.space();
        let n = sp.len();
        let pts: Vec<usize> = sp.linear_extension().into_iter().filter(|&x| u.contains(x)).collect();
        let above = (0..n)
            .map(|x| {
                if u.contains(x) {
                    sp.up(x).iter().filter(|&y| y != x).collect()
                } else {
                    Vec::new()
                }
            })
            .collect::<Vec<Vec<usize>>>();
        let mut vars = Vec::new();
        for &x in &pts {
            let mut seen = BTreeSet::new();
            for s in 0..f.stalk(x) {
                if dedupe {
                    let sig: Vec<usize> = above[x].iter().map(|&y| f.map(x, y)[s]).collect();
                    if !seen.insert(sig) {
                        continue;
                    }
                }
                vars.push((x, s));
            }
        }
        Engine {
            f,
            g,
            phi: (0..n).map(|x| vec![UNSET; if u.contains(x) { f.stalk(x) } else { 0 }]).collect(),
            used: injective.then(|| (0..n).map(|x| vec![false; g.stalk(x)]).collect()),
            above,
            vars,
            trail: Vec::new(),
        }
    }

    fn set(&mut self, x: usize, s: usize, t: usize) -> bool {
        let cur = self.phi[x][s];
        if cur != UNSET {
            return cur == t;
        }
        if let Some(used) = &mut self.used {
            if used[x][t] {
                return false;
            }
            used[x][t] = true;
        }
        self.phi[x][s] = t;
        self.trail.push((x, s));
        true
    }

    /// Sets `phi_x(s) = t` and everything it forces above `x`.
    fn assign(&mut self, x: usize, s: usize, t: usize) -> bool {
        if !self.set(x, s, t) {
            return false;
        }
        for i in 0..self.above[x].len() {
            let y = self.above[x][i];
            let (s2, t2) = (self.f.map(x, y)[s], self.g.map(x, y)[t]);
            if !self.set(y, s2, t2) {
                return false;
            }
        }
        true
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (x, s) = self.trail.pop().unwrap();
            if let Some(used) = &mut self.used {
                used[x][self.phi[x][s]] = false;
            }
            self.phi[x][s] = UNSET;
        }
    }

    /// Visits every complete assignment; `visit` returns `true` to stop.
    fn run(&mut self, k: usize, visit: &mut dyn FnMut(&Engine) -> bool) -> bool {
        if k == self.vars.len() {
            return visit(self);
        }
        let (x, s) = self.vars[k];
        if self.phi[x][s] != UNSET {
            return self.run(k + 1, visit);
        }
        for t in 0..self.g.stalk(x) {
            let mark = self.trail.len();
            if self.assign(x, s, t) && self.run(k + 1, visit) {
                return true;
            }
            self.undo(mark);
        }
        false
    }
}

fn hopeless(f: &Sheaf, g: &Sheaf, u: PointSet) -> bool {
    u.iter().any(|x| f.stalk(x) > 0 && g.stalk(x) == 0)
}

/// Candidate images of every element: `dom[x][s]` is a sorted list of
/// elements of `g` at `x`.
type Domains = Vec<Vec<Vec<usize>>>;

/// Removes candidates without support until every restriction constraint is
/// arc consistent. `false` when some element has no candidate left.
fn propagate(f: &Sheaf, g: &Sheaf, pairs: &[(usize, usize)], dom: &mut Domains) -> bool {
    loop {
        let mut changed = false;
        for &(x, y) in pairs {
            let (fm, gm) = (f.map(x, y), g.map(x, y));
            let mut upper = std::mem::take(&mut dom[y]);
            let mut reach: Vec<Option<Vec<bool>>> = vec![None; upper.len()];
            for (s, cands) in dom[x].iter_mut().enumerate() {
                let above = &upper[fm[s]];
                let before = cands.len();
                cands.retain(|&t| above.binary_search(&gm[t]).is_ok());
                changed |= cands.len() != before;
                if cands.is_empty() {
                    dom[y] = upper;
                    return false;
                }
                let mut hit = vec![false; g.stalk(y)];
                for &t in cands.iter() {
                    hit[gm[t]] = true;
                }
                match &mut reach[fm[s]] {
                    Some(r) => r.iter_mut().zip(hit).for_each(|(a, b)| *a &= b),
                    slot => *slot = Some(hit),
                }
            }
            for (cands, r) in upper.iter_mut().zip(reach) {
                if let Some(r) = r {
                    let before = cands.len();
                    cands.retain(|&t| r[t]);
                    changed |= cands.len() != before;
                }
            }
            let dead = upper.iter().any(Vec::is_empty);
            dom[y] = upper;
            if dead {
                return false;
            }
        }
        if !changed {
            return true;
        }
    }
}

/// Search with propagation after each choice; branches on the element with
/// the fewest candidates, topmost first. Points of `order` are the
/// non-minimal points of the open: once those are fixed, arc consistency
/// leaves a valid choice for every element below them.
fn solve(f: &Sheaf, g: &Sheaf, pairs: &[(usize, usize)], order: &[usize], dom: Domains) -> bool {
    let mut stack = vec![dom];
    while let Some(mut dom) = stack.pop() {
        if !propagate(f, g, pairs, &mut dom) {
            continue;
        }
        let mut best: Option<(usize, usize, usize)> = None;
        for &x in order {
            for (s, c) in dom[x].iter().enumerate() {
                if c.len() > 1 && best.is_none_or(|(_, _, n)| c.len() < n) {
                    best = Some((x, s, c.len()));
                }
            }
        }
        let Some((x, s, _)) = best else {
            return true;
        };
        for &t in dom[x][s].iter().rev() {
            let mut next = dom.clone();
            next[x][s] = vec![t];
            stack.push(next);
        }
    }
    false
}

pub(super) fn morphism_exists(f: &Sheaf, g: &Sheaf, u: PointSet) -> bool {
    if hopeless(f, g, u) {
        return false;
    }
    let sp = f.space();
    let n = sp.len();
    let dom: Domains = (0..n)
        .map(|x| {
            if u.contains(x) {
                vec![(0..g.stalk(x)).collect(); f.stalk(x)]
            } else {
                Vec::new()
            }
        })
        .collect();
    let pairs: Vec<(usize, usize)> = u
        .iter()
        .flat_map(|x| sp.up(x).iter().filter(move |&y| y != x).map(move |y| (x, y)))
        .collect();
    let mut order: Vec<usize> = sp
        .linear_extension()
        .into_iter()
        .filter(|&x| u.contains(x) && pairs.iter().any(|&(_, y)| y == x))
        .collect();
    order.reverse();
    solve(f, g, &pairs, &order, dom)
}

/// Morphisms over `u`, each encoded as the concatenation of the tables
/// `phi_y` for `y` in `u` in increasing index order.
pub(super) fn all_morphisms(f: &Sheaf, g: &Sheaf, u: PointSet, budget: usize) -> Result<Vec<Vec<usize>>, SheafError> {
    if hopeless(f, g, u) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut over = false;
    let mut e = Engine::new(f, g, u, false, false);
    e.run(0, &mut |e| {
        if out.len() >= budget {
            over = true;
            return true;
        }
        out.push(u.iter().flat_map(|y| e.phi[y].iter().copied()).collect());
        false
    });
    if over {
        return Err(SheafError::Budget {
            what: "Hom stalk",
            limit: budget,
        });
    }
    Ok(out)
}

/// Ranges of a morphism encoding over `ux` that make up its restriction to `uy`.
pub(super) fn truncation_plan(f: &Sheaf, ux: PointSet, uy: PointSet) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut off = 0;
    for y in ux.iter() {
        let len = f.stalk(y);
        if uy.contains(y) {
            out.push(off..off + len);
        }
        off += len;
    }
    out
}

pub(super) fn sections(f: &Sheaf, u: PointSet, budget: usize) -> Result<Vec<Section>, SheafError> {
    let one = Sheaf::terminal(f.space());
    let n = f.space().len();
    Ok(all_morphisms(&one, f, u, budget)?
        .into_iter()
        .map(|enc| {
            let mut sec = vec![None; n];
            for (y, v) in u.iter().zip(enc) {
                sec[y] = Some(v);
            }
            sec
        })
        .collect())
}

/// A stalkwise bijection commuting with restrictions, as `perm[x][s]`.
pub(super) fn isomorphism(f: &Sheaf, g: &Sheaf) -> Option<Vec<Vec<usize>>> {
    if f.stalks() != g.stalks() {
        return None;
    }
    let mut found = None;
    let mut e = Engine::new(f, g, f.space().full(), true, false);
    e.run(0, &mut |e| {
        found = Some(e.phi.clone());
        true
    });
    found
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::topology::named;

    /// Brute force: every stalkwise function family, filtered by naturality.
    fn count_brute(f: &Sheaf, g: &Sheaf, u: PointSet) -> usize {
        let sp = f.space();
        let slots: Vec<(usize, usize)> = u.iter().flat_map(|x| (0..f.stalk(x)).map(move |s| (x, s))).collect();
        let mut count = 0;
        let mut choice = vec![0usize; slots.len()];
        loop {
            let phi = |x: usize, s: usize| choice[slots.iter().position(|&p| p == (x, s)).unwrap()];
            let valid = slots.iter().all(|&(x, _)| g.stalk(x) > 0)
                && slots.iter().all(|&(x, s)| {
                    sp.up(x).iter().all(|y| g.map(x, y)[phi(x, s)] == phi(y, f.map(x, y)[s]))
                });
            if valid {
                count += 1;
            }
            let mut i = 0;
            loop {
                if i == slots.len() {
                    return count;
                }
                choice[i] += 1;
                if choice[i] < g.stalk(slots[i].0).max(1) {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn morphism_counts_match_brute_force() {
        let sp = Arc::new(named::b4());
        let chi = |p: &[&str]| Sheaf::characteristic(&sp, sp.set_of(p).unwrap()).unwrap();
        let a = chi(&["l", "m"]).coproduct(&chi(&["r", "m"])).unwrap();
        let b = chi(&["l", "m", "r"]).coproduct(&chi(&["m"])).unwrap();
        let c = a.product(&b).unwrap();
        for (f, g) in [(&a, &b), (&b, &a), (&c, &a), (&a, &c), (&b, &b)] {
            for u in sp.opens() {
                let n = all_morphisms(f, g, u, usize::MAX).unwrap().len();
                assert_eq!(n, count_brute(f, g, u), "{f:?} -> {g:?} over {u:?}");
                assert_eq!(morphism_exists(f, g, u), n > 0);
            }
        }
    }
}
