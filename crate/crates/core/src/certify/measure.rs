use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PAHomeo;
use crate::rational::{self, Q};
use crate::space::CompactSet;
use crate::walk::{cell_images, CellMeasure, Masses};

use super::lp::{self, LpOutcome};

/// Largest number of reduced LP variables for which the support face is
/// computed (one LP per variable).
const FACE_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantMeasureCertificate {
    pub gens: Vec<PAHomeo>,
    /// Depth of the cells on which invariance holds.
    pub depth: u32,
    /// Masses on the cells at the resolving depth ≥ `depth`.
    pub measure: CellMeasure,
    pub consistency_depth: u32,
    /// Addresses of the depth-`depth` cells that carry mass in some
    /// invariant solution, when the system was small enough to enumerate.
    pub face: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    pub depth: u32,
    pub fine_depth: u32,
    /// z with Aᵀz ≥ 0 and bᵀz < 0 for the system built at these depths.
    #[serde(with = "rational::qvec")]
    pub farkas: Vec<Q>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureOutcome {
    Certified(InvariantMeasureCertificate),
    Infeasible(InfeasibilityCertificate),
}

/// Smallest depth F ≤ d_max at which every preimage of a depth-`depth`
/// cell is a union of depth-F cells, with those preimages per generator.
pub fn resolving_depth(k: &CompactSet, gens: &[PAHomeo], depth: u32, d_max: u32) -> Option<(u32, Vec<Vec<Vec<usize>>>)> {
    let inverses: Vec<PAHomeo> = gens.iter().map(PAHomeo::invert).collect();
    (depth..=d_max).find_map(|f| {
        let pre: Option<Vec<_>> = inverses.iter().map(|g| cell_images(k, g, depth, f)).collect();
        pre.map(|p| (f, p))
    })
}

/// The system {μ(g⁻¹c) = μ(c) ∀ g, c; Σμ = 1} over depth-F cells, with
/// optional marginal constraints onto a coarser exact measure.
pub fn invariance_system(k: &CompactSet, depth: u32, fine: u32, pre: &[Vec<Vec<usize>>], marginal: Option<&CellMeasure>) -> (Vec<Vec<Q>>, Vec<Q>) {
    let n = k.cell_count(fine);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for per in pre {
        for (c, idx) in per.iter().enumerate() {
            let mut row = vec![Q::zero(); n];
            for &i in idx {
                row[i] += Q::one();
            }
            for i in k.cell_range(&k.index_address(c, depth), fine).expect("coarse cell") {
                row[i] -= Q::one();
            }
            a.push(row);
            b.push(Q::zero());
        }
    }
    a.push(vec![Q::one(); n]);
    b.push(Q::one());
    if let Some(m) = marginal {
        let Masses::Exact(v) = &m.masses else { unreachable!("marginals are exact") };
        for (j, mass) in v.iter().enumerate() {
            let mut row = vec![Q::zero(); n];
            for i in k.cell_range(&k.index_address(j, m.depth), fine).expect("coarse cell") {
                row[i] = Q::one();
            }
            a.push(row);
            b.push(mass.clone());
        }
    }
    (a, b)
}

/// Merges variables tied by rows x_i − x_j = 0 and drops rows that vanish.
struct Presolved {
    class_of: Vec<usize>,
    a: Vec<Vec<Q>>,
    b: Vec<Q>,
    classes: usize,
}

fn find(p: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while p[r] != r {
        r = p[r];
    }
    let mut y = x;
    while p[y] != r {
        let next = p[y];
        p[y] = r;
        y = next;
    }
    r
}

fn presolve(a: &[Vec<Q>], b: &[Q], n: usize) -> Presolved {
    let mut parent: Vec<usize> = (0..n).collect();
    let mut kept = Vec::new();
    for (row, rhs) in a.iter().zip(b) {
        let nz: Vec<usize> = (0..n).filter(|&i| !row[i].is_zero()).collect();
        if rhs.is_zero() && nz.len() == 2 && (&row[nz[0]] + &row[nz[1]]).is_zero() {
            let (x, y) = (find(&mut parent, nz[0]), find(&mut parent, nz[1]));
            parent[x] = y;
        } else if !nz.is_empty() || !rhs.is_zero() {
            kept.push((row, rhs));
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    for &r in &roots {
        let next = ids.len();
        ids.entry(r).or_insert(next);
    }
    let class_of: Vec<usize> = roots.iter().map(|r| ids[r]).collect();
    let classes = ids.len();
    let mut ra = Vec::new();
    let mut rb = Vec::new();
    for (row, rhs) in kept {
        let mut red = vec![Q::zero(); classes];
        for i in 0..n {
            if !row[i].is_zero() {
                red[class_of[i]] += &row[i];
            }
        }
        if red.iter().all(Zero::is_zero) && rhs.is_zero() {
            continue;
        }
        ra.push(red);
        rb.push(rhs.clone());
    }
    Presolved { class_of, a: ra, b: rb, classes }
}

enum Solved {
    Feasible(Vec<Q>, Option<Vec<bool>>),
    Infeasible(Vec<Q>),
}

fn solve_system(a: &[Vec<Q>], b: &[Q], n: usize, want_face: bool) -> Solved {
    let p = presolve(a, b, n);
    match lp::solve(&p.a, &p.b, None) {
        LpOutcome::Feasible(y) => {
            let x: Vec<Q> = p.class_of.iter().map(|&c| y[c].clone()).collect();
            let face = (want_face && p.classes <= FACE_LIMIT).then(|| {
                let support: Vec<bool> = (0..p.classes)
                    .map(|c| {
                        let mut cost = vec![Q::zero(); p.classes];
                        cost[c] = -Q::one();
                        matches!(lp::solve(&p.a, &p.b, Some(&cost)), LpOutcome::Feasible(v) if v[c].is_positive())
                    })
                    .collect();
                p.class_of.iter().map(|&c| support[c]).collect()
            });
            Solved::Feasible(x, face)
        }
        LpOutcome::Infeasible(_) => match lp::solve(a, b, None) {
            LpOutcome::Infeasible(z) => Solved::Infeasible(z),
            _ => unreachable!("presolve preserves feasibility"),
        },
        LpOutcome::Unbounded => unreachable!("no objective"),
    }
}

/// Exact invariant cell measure at `depth`, refined as far as d_max, or an
/// exact infeasibility certificate.
pub fn solve_invariant_measure(gens: &[PAHomeo], depth: u32, d_max: u32) -> Result<MeasureOutcome> {
    let Some(first) = gens.first() else {
        return Err(Error::Argument("no generators".into()));
    };
    let k = first.space().clone();
    if gens.iter().any(|g| !g.space().same_set(&k)) {
        return Err(Error::SpaceMismatch);
    }
    if depth > d_max {
        return Err(Error::Depth(format!("depth {depth} exceeds d_max {d_max}")));
    }
    let Some((fine, pre)) = resolving_depth(&k, gens, depth, d_max) else {
        return Err(Error::Depth(format!("cells of depth {depth} are not resolved by depth {d_max}")));
    };
    let (a, b) = invariance_system(&k, depth, fine, &pre, None);
    let x = match solve_system(&a, &b, k.cell_count(fine), true) {
        Solved::Infeasible(farkas) => return Ok(MeasureOutcome::Infeasible(InfeasibilityCertificate { depth, fine_depth: fine, farkas })),
        Solved::Feasible(x, face) => {
            let face = face.map(|f| {
                (0..k.cell_count(depth))
                    .map(|c| k.index_address(c, depth))
                    .filter(|addr| k.cell_range(addr, fine).expect("coarse cell").any(|i| f[i]))
                    .map(|addr| k.address_string(&addr))
                    .collect()
            });
            (x, face)
        }
    };
    let (x, face) = x;
    let base = CellMeasure::exact(fine, x);
    let mut consistency = depth;
    for d in depth + 1..=d_max {
        let Some((f, pre)) = resolving_depth(&k, gens, d, d_max) else {
            break;
        };
        let (a, b) = invariance_system(&k, d, f, &pre, Some(&base));
        match solve_system(&a, &b, k.cell_count(f), false) {
            Solved::Feasible(..) => consistency = d,
            Solved::Infeasible(_) => break,
        }
    }
    Ok(MeasureOutcome::Certified(InvariantMeasureCertificate {
        gens: gens.to_vec(),
        depth,
        measure: base,
        consistency_depth: consistency,
        face,
    }))
}

/// Exact recheck of μ(g⁻¹c) = μ(c) for every generator and depth-`depth`
/// cell, plus Σμ = 1 and μ ≥ 0.
pub fn measure_is_invariant(gens: &[PAHomeo], depth: u32, mu: &CellMeasure) -> bool {
    let Masses::Exact(x) = &mu.masses else { return false };
    let k = gens[0].space();
    if x.len() != k.cell_count(mu.depth) || x.iter().any(Signed::is_negative) {
        return false;
    }
    let Some((_, pre)) = resolving_depth(k, gens, depth, mu.depth) else {
        return false;
    };
    let (a, b) = invariance_system(k, depth, mu.depth, &pre, None);
    lp::check_feasible(&a, &b, x)
}
