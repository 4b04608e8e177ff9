use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::Sheaf;
use crate::topology::{permutations, FiniteSpace};

/// Canonical representative of the isomorphism class: the relabelling of
/// stalk elements with the lexicographically least code.
pub(crate) fn canonical(f: &Sheaf) -> Sheaf {
    let n = f.space().len();
    let perms: Vec<Vec<Vec<usize>>> = (0..n).map(|x| permutations(f.stalk(x))).collect();
    let mut choice = vec![0usize; n];
    let mut best: Option<(Vec<usize>, Sheaf)> = None;
    loop {
        let p: Vec<Vec<usize>> = (0..n).map(|x| perms[x][choice[x]].clone()).collect();
        let g = f.relabel(&p);
        let c = g.code();
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, g));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best.unwrap().1;
            }
            choice[i] += 1;
            if choice[i] < perms[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// All sheaves on `space` with stalks of size at most `max_stalk`, one per
/// isomorphism class, ordered by total stalk size, then stalk sizes, then maps.
pub fn enumerate_sheaves(space: &Arc<FiniteSpace>, max_stalk: usize) -> Vec<Sheaf> {
    let n = space.len();
    let covers = space.cover_pairs();
    let mut found: BTreeMap<(usize, Vec<usize>), Sheaf> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut stalks = vec![0usize; n];
    loop {
        let up_closed = covers.iter().all(|&(x, y)| stalks[x] == 0 || stalks[y] > 0);
        if up_closed {
            let mut choice = vec![0usize; covers.len()];
            let counts: Vec<usize> = covers
                .iter()
                .map(|&(x, y)| stalks[y].pow(stalks[x] as u32))
                .collect();
            loop {
                let mut maps = BTreeMap::new();
                for (k, &(x, y)) in covers.iter().enumerate() {
                    let mut code = choice[k];
                    let mut m = Vec::with_capacity(stalks[x]);
                    for _ in 0..stalks[x] {
                        m.push(code % stalks[y]);
                        code /= stalks[y];
                    }
                    maps.insert((x, y), m);
                }
                if let Ok(f) = Sheaf::from_cover_maps(space.clone(), stalks.clone(), &maps) {
                    let c = canonical(&f);
                    let code = c.code();
                    if seen.insert(code.clone()) {
                        found.insert((stalks.iter().sum(), code), c);
                    }
                }
                let mut i = 0;
                loop {
                    if i == covers.len() {
                        break;
                    }
                    choice[i] += 1;
                    if choice[i] < counts[i] {
                        break;
                    }
                    choice[i] = 0;
                    i += 1;
                }
                if i == covers.len() {
                    break;
                }
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return found.into_values().collect();
            }
            stalks[i] += 1;
            if stalks[i] <= max_stalk {
                break;
            }
            stalks[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::named;

    #[test]
    fn point_and_chain_counts() {
        // On a point, a sheaf is just a finite set.
        let p = Arc::new(named::point());
        assert_eq!(enumerate_sheaves(&p, 3).len(), 4);
        // On 0<1: sets A, B with a function A -> B, up to isomorphism.
        // Stalk sizes <= 2: B=0 forces A=0 (1); B=1: A in 0..=2 (3);
        // B=2: A=0 (1), A=1 (1 up to swapping B), A=2 (constant or bijection: 2).
        let c = Arc::new(named::chain(2));
        assert_eq!(enumerate_sheaves(&c, 2).len(), 1 + 3 + 1 + 1 + 2);
    }

    #[test]
    fn classes_are_pairwise_non_isomorphic() {
        let sp = Arc::new(named::i3());
        let all = enumerate_sheaves(&sp, 2);
        for (i, f) in all.iter().enumerate() {
            for g in &all[i + 1..] {
                assert!(!f.is_isomorphic(g));
            }
        }
        let two = Sheaf::characteristic(&sp, sp.set_of(&["l", "m"]).unwrap())
            .unwrap()
            .coproduct(&Sheaf::characteristic(&sp, sp.set_of(&["r", "m"]).unwrap()).unwrap())
            .unwrap();
        assert!(all.iter().any(|f| f.is_isomorphic(&two)));
        assert_eq!(all[0], Sheaf::empty(&sp));
    }
}
