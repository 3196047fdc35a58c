use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PAHomeo;
use crate::rational::{self, Q};
use crate::space::{PointSet, Region};
use crate::walk::WalkModel;

use super::contraction::{contraction_candidate, DEFAULT_P_CAP};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    #[serde(with = "rational::qstr")]
    pub point: Q,
    /// Minimal period.
    pub period: u32,
    /// Derivative of f^period at the point.
    #[serde(with = "rational::qstr")]
    pub multiplier: Q,
}

impl PeriodicPoint {
    pub fn is_hyperbolic(&self) -> bool {
        self.multiplier.abs() != Q::one()
    }
}

/// f^period is the identity on K ∩ [lo, hi].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicFamily {
    pub period: u32,
    #[serde(with = "rational::qstr")]
    pub lo: Q,
    #[serde(with = "rational::qstr")]
    pub hi: Q,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicReport {
    pub points: Vec<PeriodicPoint>,
    pub families: Vec<PeriodicFamily>,
}

fn minimal_period(f: &PAHomeo, x: &Q, n: u32) -> u32 {
    let mut y = x.clone();
    for d in 1..=n {
        y = f.apply_member(&y);
        if &y == x {
            return d;
        }
    }
    n
}

/// Isolated periodic points of minimal period ≤ max_period, read off the
/// branches of f^n, and maximal families of non-isolated ones.
pub fn periodic_points(f: &PAHomeo, max_period: u32) -> Result<PeriodicReport> {
    if max_period == 0 {
        return Err(Error::Argument("max_period must be ≥ 1".into()));
    }
    let k = f.space();
    let mut report = PeriodicReport::default();
    let mut fnp = PAHomeo::identity(k.clone());
    for n in 1..=max_period {
        fnp = f.compose(&fnp)?;
        for b in fnp.branches() {
            if b.slope.is_one() {
                let covered = report.families.iter().any(|fm| n % fm.period == 0 && &fm.lo <= b.lo() && b.hi() <= &fm.hi);
                if b.offset.is_zero() && !covered {
                    report.families.push(PeriodicFamily { period: n, lo: b.lo().clone(), hi: b.hi().clone() });
                }
                continue;
            }
            let x = &b.offset / (Q::one() - &b.slope);
            if &x < b.lo() || &x > b.hi() || !k.contains(&x) || report.points.iter().any(|p| p.point == x) {
                continue;
            }
            if minimal_period(f, &x, n) == n {
                report.points.push(PeriodicPoint { point: x, period: n, multiplier: b.slope.clone() });
            }
        }
    }
    report.points.sort_by(|a, b| (a.period, &a.point).cmp(&(b.period, &b.point)));
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MorseSmaleCertificate {
    pub g: PAHomeo,
    pub a: Region,
    pub b: Region,
    pub max_period: u32,
    pub periodic: Vec<PeriodicPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MorseSmaleOutcome {
    Certified(MorseSmaleCertificate),
    Rejected(String),
}

impl MorseSmaleOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, MorseSmaleOutcome::Certified(_))
    }
}

fn steep_point(f: &PAHomeo, r: &Region) -> Option<(Q, Q)> {
    let k = f.space();
    f.branches().iter().find_map(|b| {
        if b.slope.abs() < Q::one() {
            return None;
        }
        let piece = r.intersect(&Region::closed(b.lo().clone(), b.hi().clone()));
        piece.spans().iter().find_map(|s| k.span_point(s)).map(|x| (x, b.slope.abs()))
    })
}

/// Period horizon of the hyperbolicity check. Once the slope bounds and
/// g(K∖A) ⊆ B hold, every periodic point already lies in A ∪ B.
pub const MORSE_SMALE_HORIZON: u32 = 2;

/// Exact Morse-Smale test with repelling region A and attracting region B.
pub fn check_morse_smale(f: &PAHomeo, a: &Region, b: &Region) -> Result<MorseSmaleOutcome> {
    let k = f.space();
    let max_period = MORSE_SMALE_HORIZON;
    let reject = |s: String| Ok(MorseSmaleOutcome::Rejected(s));
    if !k.region_disjoint(a, b) {
        return reject("A and B intersect in K".into());
    }
    let off_a = k.complement(a);
    let off_b = k.complement(b);
    if let Some((x, s)) = steep_point(f, &off_a) {
        return reject(format!("|g'| = {s} ≥ 1 at {x} in K∖A"));
    }
    if let Some((x, s)) = steep_point(&f.invert(), &off_b) {
        return reject(format!("|(g^-1)'| = {s} ≥ 1 at {x} in K∖B"));
    }
    if !k.region_subset(&f.image(&off_a), b) {
        return reject("g(K∖A) is not contained in B".into());
    }
    let per = periodic_points(f, max_period)?;
    if let Some(fm) = per.families.first() {
        return reject(format!("g^{} is the identity on K ∩ [{}, {}]", fm.period, fm.lo, fm.hi));
    }
    let ab = a.union(b);
    for p in &per.points {
        if !p.is_hyperbolic() {
            return reject(format!("periodic point {} of period {} is not hyperbolic", p.point, p.period));
        }
        if !ab.contains(&p.point) {
            return reject(format!("periodic point {} lies outside A ∪ B", p.point));
        }
    }
    Ok(MorseSmaleOutcome::Certified(MorseSmaleCertificate {
        g: f.clone(),
        a: a.clone(),
        b: b.clone(),
        max_period,
        periodic: per.points,
    }))
}

/// Powers of the contraction candidates tried per word.
const MAX_POWER: u32 = 4;

/// Searches random words of a symmetric model for a Morse-Smale element.
pub fn find_morse_smale(model: &WalkModel, eps: &Q, n_max: usize, runs: usize) -> Result<Option<MorseSmaleCertificate>> {
    if !model.symmetric() {
        return Err(Error::Model("find_morse_smale needs a symmetric model".into()));
    }
    if !eps.is_positive() || eps >= &Q::one() || n_max == 0 || runs == 0 {
        return Err(Error::Argument("find_morse_smale needs 0 < eps < 1 and n_max, runs ≥ 1".into()));
    }
    let k = model.space();
    for run in 0..runs {
        let mut t = model.run(run as u64);
        for n in 1..=n_max {
            let g = t.forward_word(n);
            if g.is_identity() {
                continue;
            }
            let Some((a, b)) = contraction_candidate(&g, model.gens(), eps, DEFAULT_P_CAP)? else {
                continue;
            };
            let ra = k.epsilon_neighborhood(&a, eps)?;
            let rb = k.epsilon_neighborhood(&b, eps)?;
            if !k.region_disjoint(&ra, &rb) {
                continue;
            }
            let mut h = g.clone();
            for _ in 0..MAX_POWER {
                if let MorseSmaleOutcome::Certified(c) = check_morse_smale(&h, &ra, &rb)? {
                    return Ok(Some(c));
                }
                h = g.compose(&h)?;
            }
        }
    }
    Ok(None)
}

/// Fixed points of f with multiplier, attracting when |slope| < 1.
pub fn fixed_points(f: &PAHomeo) -> Vec<PeriodicPoint> {
    periodic_points(f, 1).expect("period 1").points
}

pub(crate) fn snap(points: &PointSet, fixed: &[PeriodicPoint], eps: &Q, attracting: bool) -> PointSet {
    let snapped = points.points().iter().map(|x| {
        fixed
            .iter()
            .filter(|p| (p.multiplier.abs() < Q::one()) == attracting && p.is_hyperbolic())
            .map(|p| (rational::abs(&(&p.point - x)), &p.point))
            .filter(|(d, _)| d < eps)
            .min()
            .map(|(_, p)| p.clone())
            .unwrap_or_else(|| x.clone())
    });
    PointSet::from_members(snapped.collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::rational::{q, qi};
    use crate::space::Span;

    #[test]
    fn periodic_examples() {
        let pairs = |rep: &PeriodicReport| rep.points.iter().map(|p| (p.point.clone(), p.period, p.multiplier.clone())).collect::<Vec<_>>();
        let rep = periodic_points(&g3(), 3).unwrap();
        assert_eq!(pairs(&rep), vec![(qi(0), 1, q(1, 3)), (qi(1), 1, qi(3))]);
        assert!(rep.families.is_empty());
        let rep = periodic_points(&a1(), 3).unwrap();
        assert_eq!(pairs(&rep), vec![(q(1, 4), 1, q(1, 9)), (qi(1), 1, qi(9))]);
        let rep = periodic_points(&h(), 2).unwrap();
        assert!(rep.points.is_empty());
        assert_eq!(rep.families, vec![PeriodicFamily { period: 2, lo: qi(0), hi: qi(1) }]);
        let rep = periodic_points(&r(), 2).unwrap();
        assert!(rep.points.is_empty());
        assert_eq!(rep.families.len(), 1);
        assert!(periodic_points(&g3(), 0).is_err());
    }

    #[test]
    fn morse_smale_examples() {
        let k = ternary();
        let open = |a: Q, b: Q| Region::from_spans(vec![Span::open(a, b)]);
        let half_open_top = |a: Q| Region::from_spans(vec![Span { lo: a, hi: qi(1), lo_open: true, hi_open: false }]);
        let low = Region::from_spans(vec![Span { lo: qi(0), hi: q(1, 2), lo_open: false, hi_open: true }]);
        let out = check_morse_smale(&g3(), &half_open_top(q(7, 9)), &low).unwrap();
        assert!(matches!(out, MorseSmaleOutcome::Rejected(_)));
        let MorseSmaleOutcome::Certified(c) = check_morse_smale(&g3(), &half_open_top(q(1, 2)), &low).unwrap() else { panic!() };
        assert_eq!(c.periodic.len(), 2);
        let out = check_morse_smale(&a1(), &half_open_top(q(8, 9)), &open(q(-1, 9), q(4, 9))).unwrap();
        assert!(matches!(out, MorseSmaleOutcome::Rejected(_)));
        let MorseSmaleOutcome::Certified(c) = check_morse_smale(&a1(), &half_open_top(q(7, 9)), &open(q(-1, 9), q(4, 9))).unwrap() else {
            panic!()
        };
        let pts: Vec<(Q, Q)> = c.periodic.iter().map(|p| (p.point.clone(), p.multiplier.clone())).collect();
        assert_eq!(pts, vec![(q(1, 4), q(1, 9)), (qi(1), qi(9))]);
        let out = check_morse_smale(&h(), &k.whole(), &Region::empty()).unwrap();
        assert!(!out.is_certified());
    }
}
