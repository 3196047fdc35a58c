//! Exact rational simplex for {Ax = b, x ≥ 0}, with an optional linear
//! objective. Bland's rule, two phases, dense tableau.

use num_traits::{Signed, Zero};

use crate::rational::Q;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    /// A basic feasible point (optimal when an objective was given).
    Feasible(Vec<Q>),
    /// z with Aᵀz ≥ 0 and bᵀz < 0.
    Infeasible(Vec<Q>),
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Q>>,
    rhs: Vec<Q>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v = &*v / &p;
            }
        }
        self.rhs[r] = &self.rhs[r] / &p;
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r].clone();
        let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for &j in &nz {
                let d = &f * &prow[j];
                self.rows[i][j] -= d;
            }
            let d = &f * &prhs;
            self.rhs[i] -= d;
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[Q]) -> Vec<Q> {
        let mut r = cost.to_vec();
        for (i, &bi) in self.basis.iter().enumerate() {
            if cost[bi].is_zero() {
                continue;
            }
            for (j, v) in self.rows[i].iter().enumerate() {
                if !v.is_zero() {
                    r[j] -= &cost[bi] * v;
                }
            }
        }
        r
    }

    /// Minimizes cost over columns in `allowed`; false when unbounded.
    fn optimize(&mut self, cost: &[Q], allowed: usize) -> bool {
        loop {
            let r = self.reduced_costs(cost);
            let Some(e) = (0..allowed).find(|&j| r[j].is_negative()) else {
                return true;
            };
            let mut best: Option<(Q, usize)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][e];
                if a.is_positive() {
                    let ratio = &self.rhs[i] / a;
                    let better = match &best {
                        None => true,
                        Some((br, bi)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((ratio, i));
                    }
                }
            }
            let Some((_, l)) = best else {
                return false;
            };
            self.pivot(l, e);
        }
    }
}

/// Solves {Ax = b, x ≥ 0}; with `cost`, minimizes cost·x over that set.
pub fn solve(a: &[Vec<Q>], b: &[Q], cost: Option<&[Q]>) -> LpOutcome {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    let sign: Vec<bool> = b.iter().map(|x| x.is_negative()).collect();
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 0..m {
        let mut row: Vec<Q> = a[i].iter().map(|v| if sign[i] { -v } else { v.clone() }).collect();
        row.extend((0..m).map(|k| if k == i { Q::from_integer(1.into()) } else { Q::zero() }));
        rows.push(row);
        rhs.push(if sign[i] { -&b[i] } else { b[i].clone() });
    }
    let mut t = Tableau { rows, rhs, basis: (n..n + m).collect() };
    let phase1: Vec<Q> = (0..n + m).map(|j| if j < n { Q::zero() } else { Q::from_integer(1.into()) }).collect();
    t.optimize(&phase1, n + m);
    let infeas: Q = t.basis.iter().zip(&t.rhs).filter(|(&bi, _)| bi >= n).map(|(_, v)| v.clone()).sum();
    if infeas.is_positive() {
        let r = t.reduced_costs(&phase1);
        // y_i = 1 − r_{n+i}; z = −y, undoing the row sign flips
        let z: Vec<Q> = (0..m)
            .map(|i| {
                let y = Q::from_integer(1.into()) - &r[n + i];
                if sign[i] { y } else { -y }
            })
            .collect();
        return LpOutcome::Infeasible(z);
    }
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !t.rows[i][j].is_zero()) {
                t.pivot(i, j);
            }
        }
    }
    if let Some(c) = cost {
        let mut full: Vec<Q> = c.to_vec();
        full.extend((0..m).map(|_| Q::zero()));
        if !t.optimize(&full, n) {
            return LpOutcome::Unbounded;
        }
    }
    let mut x = vec![Q::zero(); n];
    for (i, &bi) in t.basis.iter().enumerate() {
        if bi < n {
            x[bi] = t.rhs[i].clone();
        }
    }
    LpOutcome::Feasible(x)
}

/// Aᵀz ≥ 0 and bᵀz < 0.
pub fn check_farkas(a: &[Vec<Q>], b: &[Q], z: &[Q]) -> bool {
    let n = a.first().map_or(0, Vec::len);
    let cols_ok = (0..n).all(|j| {
        let s: Q = a.iter().zip(z).map(|(row, zi)| &row[j] * zi).sum();
        !s.is_negative()
    });
    let bz: Q = b.iter().zip(z).map(|(x, y)| x * y).sum();
    cols_ok && bz.is_negative()
}

pub fn check_feasible(a: &[Vec<Q>], b: &[Q], x: &[Q]) -> bool {
    x.iter().all(|v| !v.is_negative())
        && a.iter().zip(b).all(|(row, bi)| row.iter().zip(x).map(|(u, v)| u * v).sum::<Q>() == *bi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use proptest::prelude::*;

    fn m(rows: &[&[i64]]) -> Vec<Vec<Q>> {
        rows.iter().map(|r| r.iter().map(|&v| qi(v)).collect()).collect()
    }

    #[test]
    fn feasible_and_optimal() {
        let a = m(&[&[1, 1, 1]]);
        let b = vec![qi(1)];
        let LpOutcome::Feasible(x) = solve(&a, &b, Some(&[qi(3), qi(1), qi(2)])) else { panic!() };
        assert_eq!(x, vec![qi(0), qi(1), qi(0)]);
        let a = m(&[&[1, -1], &[1, 1]]);
        let LpOutcome::Feasible(x) = solve(&a, &[qi(0), qi(1)], None) else { panic!() };
        assert_eq!(x, vec![q(1, 2), q(1, 2)]);
    }

    #[test]
    fn infeasible_with_certificate() {
        let a = m(&[&[1, 1], &[1, 1]]);
        let b = vec![qi(1), qi(2)];
        let LpOutcome::Infeasible(z) = solve(&a, &b, None) else { panic!() };
        assert!(check_farkas(&a, &b, &z));
        let a = m(&[&[1], &[1]]);
        let b = vec![qi(-1), qi(0)];
        let LpOutcome::Infeasible(z) = solve(&a, &b, None) else { panic!() };
        assert!(check_farkas(&a, &b, &z));
    }

    #[test]
    fn unbounded_and_redundant() {
        let a = m(&[&[1, -1], &[2, -2]]);
        assert_eq!(solve(&a, &[qi(0), qi(0)], Some(&[qi(0), qi(-1)])), LpOutcome::Unbounded);
        let LpOutcome::Feasible(x) = solve(&a, &[qi(0), qi(0)], None) else { panic!() };
        assert!(check_feasible(&a, &[qi(0), qi(0)], &x));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn outcome_is_certified(vals in proptest::collection::vec(-3i64..4, 12), rhs in proptest::collection::vec(-3i64..4, 3)) {
            let a: Vec<Vec<Q>> = vals.chunks(4).map(|r| r.iter().map(|&v| qi(v)).collect()).collect();
            let b: Vec<Q> = rhs.iter().map(|&v| qi(v)).collect();
            match solve(&a, &b, None) {
                LpOutcome::Feasible(x) => prop_assert!(check_feasible(&a, &b, &x)),
                LpOutcome::Infeasible(z) => prop_assert!(check_farkas(&a, &b, &z)),
                LpOutcome::Unbounded => prop_assert!(false),
            }
        }
    }
}
