use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PAHomeo;
use crate::rational::{self, Q};
use crate::space::PointSet;

/// gens ∪ inverses without repeats, ordered by name.
pub fn alphabet(gens: &[PAHomeo]) -> Vec<PAHomeo> {
    let mut out: Vec<PAHomeo> = Vec::new();
    for g in gens {
        for h in [g.clone(), g.invert()] {
            if !out.contains(&h) {
                out.push(h);
            }
        }
    }
    out.sort_by_key(|g| g.label().join(" "));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum Displacement {
    Found(PAHomeo),
    /// Some point of A has this finite orbit, so the group has a finite orbit.
    FiniteOrbit(PointSet),
    BudgetExhausted,
}

/// Orbit size beyond which an orbit is treated as infinite.
pub const ORBIT_BOUND: usize = 4096;

/// Calls to the direct search allowed inside the induction fallback.
const INDUCTION_BUDGET: usize = 2000;

fn word_map(alpha: &[PAHomeo], letters: &[usize], id: &PAHomeo) -> PAHomeo {
    letters.iter().fold(id.clone(), |acc, &l| alpha[l].compose(&acc).expect("shared space"))
}

/// Breadth-first search over words (first-applied letter first) for g with
/// g(pts) ∩ avoid = ∅.
fn bfs(alpha: &[PAHomeo], pts: &[Q], avoid: &HashSet<Q>, max_len: usize) -> Option<Vec<usize>> {
    if !pts.iter().any(|p| avoid.contains(p)) {
        return Some(Vec::new());
    }
    let mut seen: HashSet<Vec<Q>> = HashSet::from([pts.to_vec()]);
    let mut frontier: Vec<(Vec<Q>, Vec<usize>)> = vec![(pts.to_vec(), Vec::new())];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (state, word) in &frontier {
            for (l, s) in alpha.iter().enumerate() {
                let img: Vec<Q> = state.iter().map(|x| s.apply_member(x)).collect();
                if !seen.insert(img.clone()) {
                    continue;
                }
                let mut w = word.clone();
                w.push(l);
                if !img.iter().any(|p| avoid.contains(p)) {
                    return Some(w);
                }
                next.push((img, w));
            }
        }
        if next.is_empty() {
            return None;
        }
        frontier = next;
    }
    None
}

/// Induction on |pts|: displace all but the last point off growing sets,
/// then either the last point leaves `avoid` or a single-point
/// displacement h finishes one of the pairwise disjoint candidates.
fn induction(alpha: &[PAHomeo], pts: &[Q], avoid: &HashSet<Q>, max_len: usize, id: &PAHomeo, budget: &mut usize) -> Option<PAHomeo> {
    if *budget == 0 {
        return None;
    }
    *budget -= 1;
    if let Some(w) = bfs(alpha, pts, avoid, max_len) {
        return Some(word_map(alpha, &w, id));
    }
    if pts.len() == 1 {
        return None;
    }
    let (rest, last) = pts.split_at(pts.len() - 1);
    let a = &last[0];
    let mut used = avoid.clone();
    let mut singles: HashMap<Q, Option<PAHomeo>> = HashMap::new();
    for _ in 0..avoid.len() * avoid.len() + 1 {
        let g = induction(alpha, rest, &used, max_len, id, budget)?;
        let c = g.apply_member(a);
        if !avoid.contains(&c) {
            return Some(g);
        }
        if !singles.contains_key(&c) {
            let h = induction(alpha, std::slice::from_ref(&c), avoid, max_len, id, budget);
            singles.insert(c.clone(), h);
        }
        let moved: Vec<Q> = rest.iter().map(|x| g.apply_member(x)).collect();
        if let Some(h) = &singles[&c] {
            if moved.iter().all(|x| !avoid.contains(&h.apply_member(x))) {
                return Some(h.compose(&g).expect("shared space"));
            }
        }
        used.extend(moved);
    }
    None
}

/// A word g over gens ∪ inverses with g(A) ∩ B = ∅.
pub fn find_displacement(gens: &[PAHomeo], a: &PointSet, b: &PointSet, max_len: usize) -> Result<Displacement> {
    if a.is_empty() || b.is_empty() || max_len == 0 {
        return Err(Error::Argument("find_displacement needs nonempty A, B and max_len ≥ 1".into()));
    }
    if gens.is_empty() {
        return Err(Error::Argument("no generators".into()));
    }
    let alpha = alphabet(gens);
    let id = PAHomeo::identity(gens[0].space().clone());
    let avoid: HashSet<Q> = b.points().iter().cloned().collect();
    if let Some(w) = bfs(&alpha, a.points(), &avoid, max_len) {
        return Ok(Displacement::Found(word_map(&alpha, &w, &id)));
    }
    for p in a.points() {
        if let Some(orbit) = orbit_closure(&alpha, std::slice::from_ref(p), ORBIT_BOUND) {
            return Ok(Displacement::FiniteOrbit(PointSet::from_members(orbit)));
        }
    }
    let mut budget = INDUCTION_BUDGET;
    Ok(match induction(&alpha, a.points(), &avoid, max_len, &id, &mut budget) {
        Some(g) => Displacement::Found(g),
        None => Displacement::BudgetExhausted,
    })
}

fn orbit_closure(alpha: &[PAHomeo], starts: &[Q], bound: usize) -> Option<Vec<Q>> {
    let mut seen: HashSet<Q> = starts.iter().cloned().collect();
    let mut frontier: Vec<Q> = starts.to_vec();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for x in &frontier {
            for s in alpha {
                let y = s.apply_member(x);
                if seen.insert(y.clone()) {
                    if seen.len() > bound {
                        return None;
                    }
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    let mut v: Vec<Q> = seen.into_iter().collect();
    v.sort();
    Some(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteOrbitCertificate {
    #[serde(with = "rational::qvec")]
    pub orbit: Vec<Q>,
    pub verified: bool,
}

/// Exact stability of a finite set under every generator and inverse.
pub fn orbit_is_stable(gens: &[PAHomeo], orbit: &[Q]) -> bool {
    let set: HashSet<&Q> = orbit.iter().collect();
    let k = gens[0].space();
    orbit.iter().all(|x| k.contains(x))
        && alphabet(gens).iter().all(|s| orbit.iter().all(|x| set.contains(&s.apply_member(x))))
}

/// Orbit closure of the starts, if it stays within `bound` points.
pub fn find_finite_orbit(gens: &[PAHomeo], starts: &[Q], bound: usize) -> Result<Option<FiniteOrbitCertificate>> {
    if bound == 0 || gens.is_empty() || starts.is_empty() {
        return Err(Error::Argument("find_finite_orbit needs generators, starts and bound ≥ 1".into()));
    }
    let k = gens[0].space();
    if let Some(x) = starts.iter().find(|x| !k.contains(x)) {
        return Err(Error::NotInSpace(x.to_string()));
    }
    Ok(orbit_closure(&alphabet(gens), starts, bound).map(|orbit| {
        let verified = orbit_is_stable(gens, &orbit);
        FiniteOrbitCertificate { orbit, verified }
    }))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanityReport {
    pub ok: bool,
    pub words_checked: usize,
    /// First reduced word equal to the identity, as letter names.
    pub identity_word: Option<Vec<String>>,
}

/// Depth of the cell midpoints used as witness probes.
const SANITY_PROBE_DEPTH: u32 = 3;

/// Every nontrivial reduced word of length ≤ L in a1^±, a2^± is shown to
/// differ from the identity: by a probe point it moves, or else by exact
/// map comparison.
pub fn free_group_sanity(a1: &PAHomeo, a2: &PAHomeo, l: usize) -> Result<SanityReport> {
    if l == 0 {
        return Err(Error::Argument("free_group_sanity needs L ≥ 1".into()));
    }
    if !a1.space().same_set(a2.space()) {
        return Err(Error::SpaceMismatch);
    }
    let k = a1.space();
    let probes = crate::walk::cell_midpoints(k, SANITY_PROBE_DEPTH);
    let letters = [a1.clone(), a1.invert(), a2.clone(), a2.invert()];
    let names = ["a1", "a1^-1", "a2", "a2^-1"];
    let inv = [1usize, 0, 3, 2];
    let mut stack: Vec<(Vec<Q>, Vec<usize>)> =
        (0..4).rev().map(|i| (probes.iter().map(|x| letters[i].apply_member(x)).collect(), vec![i])).collect();
    let mut checked = 0;
    while let Some((imgs, word)) = stack.pop() {
        checked += 1;
        if imgs == probes {
            let id = PAHomeo::identity(k.clone());
            let w = word.iter().try_fold(id, |acc, &i| letters[i].compose(&acc)).map_err(|_| Error::SpaceMismatch)?;
            if w.is_identity() {
                return Ok(SanityReport {
                    ok: false,
                    words_checked: checked,
                    identity_word: Some(word.iter().rev().map(|&i| names[i].to_string()).collect()),
                });
            }
        }
        if word.len() < l {
            let last = *word.last().unwrap();
            for i in (0..4).rev().filter(|&i| i != inv[last]) {
                let mut nw = word.clone();
                nw.push(i);
                stack.push((imgs.iter().map(|x| letters[i].apply_member(x)).collect(), nw));
            }
        }
    }
    Ok(SanityReport { ok: true, words_checked: checked, identity_word: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::rational::{q, qi};

    fn ps(v: &[Q]) -> PointSet {
        PointSet::from_members(v.to_vec())
    }

    #[test]
    fn displacement_examples() {
        let Displacement::Found(g) = find_displacement(&[h()], &ps(&[qi(0)]), &ps(&[qi(0)]), 3).unwrap() else { panic!() };
        assert_eq!(g, h());
        let orbit = [qi(0), q(1, 3), q(2, 3), qi(1)];
        let d = find_displacement(&[h(), r()], &ps(&orbit), &ps(&orbit), 4).unwrap();
        assert_eq!(d, Displacement::FiniteOrbit(ps(&orbit)));
        let Displacement::Found(g) = find_displacement(&free_generators(), &ps(&[qi(0), qi(1)]), &ps(&[qi(0), qi(1)]), 6).unwrap() else {
            panic!()
        };
        for x in [qi(0), qi(1)] {
            let y = g.apply(&x).unwrap();
            assert!(y != qi(0) && y != qi(1));
        }
        let Displacement::Found(g) = find_displacement(&[g3()], &ps(&[q(2, 9)]), &ps(&[qi(0)]), 2).unwrap() else { panic!() };
        assert!(g.is_identity());
    }

    #[test]
    fn induction_handles_crowded_targets() {
        let gens = free_generators();
        let alpha = alphabet(&gens);
        let id = PAHomeo::identity(ternary());
        let pts = vec![qi(0), q(1, 4), qi(1)];
        let avoid: HashSet<Q> = [qi(0), q(1, 4), qi(1), q(2, 9), q(2, 3)].into_iter().collect();
        let mut budget = 500;
        let g = induction(&alpha, &pts, &avoid, 1, &id, &mut budget).unwrap();
        assert!(pts.iter().all(|x| !avoid.contains(&g.apply_member(x))));
    }

    #[test]
    fn finite_orbits() {
        let c = find_finite_orbit(&[h(), r()], &[qi(0)], 100).unwrap().unwrap();
        assert_eq!(c.orbit, vec![qi(0), q(1, 3), q(2, 3), qi(1)]);
        assert!(c.verified);
        assert!(find_finite_orbit(&free_generators(), &[qi(0)], 2000).unwrap().is_none());
        let id = PAHomeo::identity(ternary()).with_label(vec!["I".into()]);
        assert_eq!(find_finite_orbit(&[id], &[q(2, 9)], 5).unwrap().unwrap().orbit, vec![q(2, 9)]);
        assert!(find_finite_orbit(&[h()], &[q(1, 2)], 5).is_err());
    }

    #[test]
    fn sanity_examples() {
        let r = free_group_sanity(&a1(), &a2(), 5).unwrap();
        assert!(r.ok);
        assert_eq!(r.words_checked, 4 * (3usize.pow(5) - 1) / 2);
        let r = free_group_sanity(&h(), &h(), 2).unwrap();
        assert!(!r.ok);
        assert_eq!(r.identity_word.unwrap(), vec!["a1".to_string(), "a1".to_string()]);
        let id = PAHomeo::identity(ternary());
        assert!(!free_group_sanity(&a1(), &id, 1).unwrap().ok);
        assert!(free_group_sanity(&a1(), &g3(), 1).unwrap().ok);
    }
}
