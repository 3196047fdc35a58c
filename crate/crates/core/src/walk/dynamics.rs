use num_traits::{Signed, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PAHomeo;
use crate::rational::{self, Q};
use crate::space::{delta_m, CompactSet, PointSet, Region, Span};

use super::measure::convex_pieces;
use super::model::{derive_seed, Trajectory, WalkModel};

/// Slope threshold below which a log-series counts as decaying.
pub const DECAY_MARGIN: f64 = -0.01;

/// One depth-2 cell size relative to the hull: diam(K)/9.
pub fn default_delta(k: &CompactSet) -> Q {
    k.diam() / Q::from_integer(9.into())
}

/// Least-squares slope of ys against their indices offset by `start`.
pub fn ls_slope(start: usize, ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = (0..ys.len()).map(|i| (start + i) as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Single-linkage clusters of points at a radius (sorted output).
pub fn clusters(points: &[Q], radius: &Q) -> Vec<Vec<Q>> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    let mut out: Vec<Vec<Q>> = Vec::new();
    for p in pts {
        match out.last_mut() {
            Some(c) if &p - c.last().unwrap() <= *radius => c.push(p),
            _ => out.push(vec![p]),
        }
    }
    out
}

/// Median member of a cluster.
pub fn representative(cluster: &[Q]) -> Q {
    cluster[cluster.len() / 2].clone()
}

/// A point of K near the middle of each cell.
pub fn cell_midpoints(k: &CompactSet, depth: u32) -> Vec<Q> {
    k.cells(depth)
        .iter()
        .filter_map(|c| k.ceil_point(&((&c.lo + &c.hi) / Q::from_integer(2.into()))))
        .collect()
}

/// Sorted break points of all generators.
pub fn generator_breaks(gens: &[PAHomeo]) -> Vec<Q> {
    let mut v: Vec<Q> = gens.iter().flat_map(|g| g.break_points()).collect();
    v.sort();
    v.dedup();
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairClass {
    Synchronized,
    Separated,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub class: PairClass,
    /// Minus the fitted log-distance slope over the last half.
    pub lambda_hat: f64,
    pub final_distance: f64,
}

/// Follows d(f_ω^k x, f_ω^k y) for k ≤ n.
pub fn classify_pair(t: &mut Trajectory<'_>, x: &Q, y: &Q, delta: &Q, n: usize) -> Result<PairVerdict> {
    let k = t.model().space();
    if !k.contains(x) || !k.contains(y) {
        return Err(Error::NotInSpace(format!("{x} or {y}")));
    }
    if !delta.is_positive() || n == 0 {
        return Err(Error::Argument("classify_pair needs delta > 0 and n ≥ 1".into()));
    }
    let xs = t.forward_orbit(x, n);
    let ys = t.forward_orbit(y, n);
    let d: Vec<Q> = xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).collect();
    let last = &d[n];
    if last.is_zero() {
        return Ok(PairVerdict { class: PairClass::Synchronized, lambda_hat: f64::INFINITY, final_distance: 0.0 });
    }
    let h = n / 2;
    let logs: Vec<f64> = d[h..].iter().map(rational::ln_abs).collect();
    let slope = ls_slope(h, &logs);
    let class = if slope < DECAY_MARGIN && last < delta {
        PairClass::Synchronized
    } else if d[h..].iter().all(|v| v >= delta) {
        PairClass::Separated
    } else {
        PairClass::Undecided
    };
    Ok(PairVerdict { class, lambda_hat: -slope, final_distance: rational::to_f64(last) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    #[serde(with = "rational::qstr")]
    pub delta: Q,
    /// Mean λ̂ over synchronized pairs with a finite fit (0 when none).
    pub lambda_fit: f64,
    pub synchronized: usize,
    pub separated: usize,
    pub undecided: usize,
    pub n: usize,
}

/// Pair i is followed along run i of the model.
pub fn dichotomy(model: &WalkModel, pairs: &[(Q, Q)], delta: &Q, n: usize) -> Result<DichotomyReport> {
    let verdicts: Vec<PairVerdict> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x, y))| classify_pair(&mut model.run(i as u64), x, y, delta, n))
        .collect::<Result<_>>()?;
    let count = |c| verdicts.iter().filter(|v| v.class == c).count();
    let fits: Vec<f64> = verdicts
        .iter()
        .filter(|v| v.class == PairClass::Synchronized && v.lambda_hat.is_finite())
        .map(|v| v.lambda_hat)
        .collect();
    let lambda_fit = if fits.is_empty() { 0.0 } else { fits.iter().sum::<f64>() / fits.len() as f64 };
    Ok(DichotomyReport {
        delta: delta.clone(),
        lambda_fit,
        synchronized: count(PairClass::Synchronized),
        separated: count(PairClass::Separated),
        undecided: count(PairClass::Undecided),
        n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellClass {
    Attractor,
    Repulsor,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellScan {
    pub address: String,
    #[serde(with = "rational::qpair")]
    pub cell: (Q, Q),
    pub class: CellClass,
    /// Minus the fitted log-diameter slope over the last half.
    pub rate: f64,
    pub final_diam: f64,
    /// Length of the longest K-convex piece of the final image.
    pub final_spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    #[serde(with = "rational::qstr")]
    pub delta: Q,
    pub depth: u32,
    pub n: usize,
    pub cells: Vec<CellScan>,
    pub repulsors: usize,
    /// repulsors·δ ≤ diam(K).
    pub bound_holds: bool,
}

fn spread(k: &CompactSet, r: &Region) -> Q {
    convex_pieces(k, r).into_iter().map(|(a, b)| b - a).max().unwrap_or_else(Q::zero)
}

/// Attractor: log-diameter slope below the margin, final diameter below δ
/// and below the cell's own. Repulsor: over the whole last half some
/// K-convex piece of the image has length ≥ δ, and the final one exceeds
/// the cell's diameter. The convex pieces of distinct cells are disjoint,
/// so repulsors·δ ≤ diam(K) always.
pub fn contraction_scan(t: &mut Trajectory<'_>, depth: u32, n: usize, delta: &Q) -> Result<ScanReport> {
    if depth == 0 || n == 0 {
        return Err(Error::Argument("contraction_scan needs depth ≥ 1 and n ≥ 1".into()));
    }
    let model = t.model();
    let k = model.space().clone();
    let letters = t.letters(n).to_vec();
    let h = n / 2;
    let cells = k.cells(depth);
    let scans: Vec<CellScan> = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut r = Region::closed(c.lo.clone(), c.hi.clone());
            let d0 = &c.hi - &c.lo;
            let mut logs = Vec::with_capacity(n - h + 1);
            let mut min_spread: Option<Q> = None;
            let mut diam = d0.clone();
            let mut spr = d0.clone();
            for step in 0..=n {
                if step > 0 {
                    r = model.gens()[letters[step - 1]].image(&r);
                }
                if step >= h {
                    diam = k.region_diam(&r);
                    spr = spread(&k, &r);
                    logs.push(rational::ln_abs(&diam));
                    if min_spread.as_ref().is_none_or(|m| &spr < m) {
                        min_spread = Some(spr.clone());
                    }
                }
            }
            let slope = ls_slope(h, &logs);
            let class = if slope < DECAY_MARGIN && &diam < delta && diam < d0 {
                CellClass::Attractor
            } else if min_spread.as_ref().is_some_and(|m| m >= delta) && spr > d0 {
                CellClass::Repulsor
            } else {
                CellClass::Undecided
            };
            CellScan {
                address: k.address_string(&k.index_address(i, depth)),
                cell: (c.lo.clone(), c.hi.clone()),
                class,
                rate: -slope,
                final_diam: rational::to_f64(&diam),
                final_spread: rational::to_f64(&spr),
            }
        })
        .collect();
    let repulsors = scans.iter().filter(|s| s.class == CellClass::Repulsor).count();
    let bound_holds = Q::from_integer(repulsors.into()) * delta <= k.diam();
    Ok(ScanReport { delta: delta.clone(), depth, n, cells: scans, repulsors, bound_holds })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakAccumulation {
    /// Δ_n, sorted.
    #[serde(with = "rational::qvec")]
    pub points: Vec<Q>,
    #[serde(with = "rational::qstr")]
    pub radius: Q,
    /// Clusters of the contributions from steps n/2..=n.
    pub tail_clusters: usize,
    #[serde(with = "rational::qvec")]
    pub tail_representatives: Vec<Q>,
    /// break_pairs(forward_word(k)) ⊆ Δ_k held for every k ≤ n.
    pub inclusion_verified: bool,
}

/// Δ_n = ⋃_{k≤n} (forward_word(k))⁻¹(Δ), Δ the generator break points.
pub fn break_accumulation(t: &mut Trajectory<'_>, n: usize, radius: &Q) -> Result<BreakAccumulation> {
    let delta = generator_breaks(t.model().gens());
    let mut acc: Vec<Q> = Vec::new();
    let mut tail: Vec<Q> = Vec::new();
    let mut ok = true;
    for step in 0..=n {
        let w = t.forward_word(step);
        let wi = w.invert();
        let pts: Vec<Q> = delta.iter().map(|p| wi.apply_member(p)).collect();
        acc.extend(pts.iter().cloned());
        acc.sort();
        acc.dedup();
        if step >= n / 2 {
            tail.extend(pts);
        }
        if w.break_points().iter().any(|b| acc.binary_search(b).is_err()) {
            ok = false;
        }
    }
    let cl = clusters(&tail, radius);
    Ok(BreakAccumulation {
        points: acc,
        radius: radius.clone(),
        tail_clusters: cl.len(),
        tail_representatives: cl.iter().map(|c| representative(c)).collect(),
        inclusion_verified: ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackwardClusterReport {
    #[serde(with = "rational::qstr")]
    pub radius: Q,
    pub counts: Vec<usize>,
    pub max: usize,
    /// Fraction of runs with exactly one cluster.
    pub single: f64,
}

/// Cluster counts of {f̄_ω^k(x) : n/2 ≤ k ≤ n}, one run per trajectory.
pub fn backward_cluster(model: &WalkModel, x: &Q, n: usize, runs: usize, radius: &Q) -> Result<BackwardClusterReport> {
    if !model.space().contains(x) {
        return Err(Error::NotInSpace(x.to_string()));
    }
    if n < 2 || runs == 0 {
        return Err(Error::Argument("backward_cluster needs n ≥ 2 and runs ≥ 1".into()));
    }
    let counts: Vec<usize> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let pts = model.run(r as u64).backward_points(x, n / 2, n);
            clusters(&pts, radius).len()
        })
        .collect();
    let max = counts.iter().copied().max().unwrap_or(0);
    let single = counts.iter().filter(|&&c| c == 1).count() as f64 / runs as f64;
    Ok(BackwardClusterReport { radius: radius.clone(), counts, max, single })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSumReport {
    pub n: usize,
    pub runs: usize,
    /// Mean over runs of S_n = Σ_{k≤n} Δ_m(f̄^k(points)).
    pub mean: f64,
    pub max: f64,
    /// (S̄_n − S̄_q)/(n − q) with q = ⌊3n/4⌋.
    pub increment: f64,
    /// S̄_k for k = 0..=n.
    pub series: Vec<f64>,
}

fn delta_sums(t: &mut Trajectory<'_>, points: &[Q], n: usize) -> Vec<f64> {
    let orbits: Vec<Vec<Q>> = points.iter().map(|p| t.backward_points(p, 0, n)).collect();
    let mut s = 0.0;
    (0..=n)
        .map(|k| {
            let tuple: Vec<Q> = orbits.iter().map(|o| o[k].clone()).collect();
            s += rational::to_f64(&delta_m(&tuple).expect("at least two points"));
            s
        })
        .collect()
}

pub fn delta_sum_statistic(model: &WalkModel, points: &[Q], n: usize, runs: usize) -> Result<DeltaSumReport> {
    if points.len() < 2 {
        return Err(Error::Argument("Δ_m needs at least two points".into()));
    }
    PointSet::new(points.to_vec(), model.space())?;
    if runs == 0 || n == 0 {
        return Err(Error::Argument("delta_sum_statistic needs n ≥ 1 and runs ≥ 1".into()));
    }
    let sums: Vec<Vec<f64>> = (0..runs).into_par_iter().map(|r| delta_sums(&mut model.run(r as u64), points, n)).collect();
    let series: Vec<f64> = (0..=n).map(|k| sums.iter().map(|s| s[k]).sum::<f64>() / runs as f64).collect();
    let q = 3 * n / 4;
    let increment = (series[n] - series[q]) / (n - q) as f64;
    let max = sums.iter().map(|s| s[n]).fold(f64::MIN, f64::max);
    Ok(DeltaSumReport { n, runs, mean: series[n], max, increment, series })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleWitness {
    #[serde(with = "rational::qvec")]
    pub points: Vec<Q>,
    /// First synchronized pair (indices into points), if any.
    pub pair: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximalityReport {
    /// None: no m ≤ cap passed.
    pub m_estimate: Option<usize>,
    pub cap: usize,
    /// Witnesses for the last tuple size tried.
    pub witnesses: Vec<TupleWitness>,
    pub delta_sum_mean: f64,
}

/// Trajectories tried per tuple before it counts as having no proximal pair.
const PROXIMAL_TRIES: u64 = 4;

/// Smallest m ≤ cap such that every sampled m-tuple of depth-3 cell
/// endpoints has a pair that synchronizes along one of a few trajectories.
pub fn proximality_degree(model: &WalkModel, cap: usize, samples: usize, horizon: usize) -> Result<ProximalityReport> {
    if cap < 2 {
        return Err(Error::Argument("tuple size cap must be ≥ 2".into()));
    }
    let k = model.space();
    let mut cands: Vec<Q> = k.cells(3).iter().flat_map(|c| [c.lo.clone(), c.hi.clone()]).collect();
    cands.sort();
    cands.dedup();
    if cands.len() < cap {
        return Err(Error::Argument("not enough cell endpoints for the tuple size".into()));
    }
    let delta = default_delta(k);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(model.seed(), u64::MAX));
    let mut witnesses = Vec::new();
    let mut found = None;
    let mut tried_m = 2;
    for m in 2..=cap {
        tried_m = m;
        let tuples: Vec<Vec<Q>> = (0..samples)
            .map(|_| {
                let mut idx: Vec<usize> = Vec::with_capacity(m);
                while idx.len() < m {
                    let i = (rng.next_u64() % cands.len() as u64) as usize;
                    if !idx.contains(&i) {
                        idx.push(i);
                    }
                }
                idx.sort_unstable();
                idx.into_iter().map(|i| cands[i].clone()).collect()
            })
            .collect();
        witnesses = tuples
            .par_iter()
            .enumerate()
            .map(|(s, tuple)| {
                for tr in 0..PROXIMAL_TRIES {
                    let mut t = model.trajectory(derive_seed(model.seed(), ((m * samples + s) as u64) * PROXIMAL_TRIES + tr));
                    for i in 0..m {
                        for j in i + 1..m {
                            let v = classify_pair(&mut t, &tuple[i], &tuple[j], &delta, horizon).expect("valid pair");
                            if v.class == PairClass::Synchronized {
                                return TupleWitness { points: tuple.clone(), pair: Some((i, j)) };
                            }
                        }
                    }
                }
                TupleWitness { points: tuple.clone(), pair: None }
            })
            .collect();
        if witnesses.iter().all(|w| w.pair.is_some()) {
            found = Some(m);
            break;
        }
    }
    let sums: Vec<f64> = witnesses
        .par_iter()
        .enumerate()
        .map(|(s, w)| *delta_sums(&mut model.run((tried_m * samples + s) as u64), &w.points, horizon).last().unwrap())
        .collect();
    let delta_sum_mean = if sums.is_empty() { 0.0 } else { sums.iter().sum::<f64>() / sums.len() as f64 };
    Ok(ProximalityReport { m_estimate: found, cap, witnesses, delta_sum_mean })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    #[serde(with = "rational::qstr")]
    pub center: Q,
    #[serde(with = "rational::qstr")]
    pub radius: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    #[serde(rename = "F", with = "rational::qvec")]
    pub f: Vec<Q>,
    /// Number of balls; None is the ∞ sentinel.
    pub p: Option<usize>,
    pub lambda_fit: f64,
    pub cover: Vec<Ball>,
    pub sup_slope_off_f: f64,
    pub repulsors: usize,
    pub repulsor_bound_holds: bool,
    /// Set when p is the ∞ sentinel.
    pub failure: Option<String>,
}

impl ContractionReport {
    pub fn succeeded(&self, p_cap: usize, lambda_min: f64) -> bool {
        self.p.is_some_and(|p| p <= p_cap) && self.lambda_fit > lambda_min
    }
}

/// Greedy cover of K ∩ r by closed balls of radius `rad`, left to right.
fn greedy_cover(k: &CompactSet, r: &Region, rad: &Q) -> Vec<Ball> {
    let two = Q::from_integer(2.into());
    let mut balls: Vec<Ball> = Vec::new();
    let mut reach: Option<Q> = None;
    for (lo, hi) in convex_pieces(k, r) {
        loop {
            let start = match &reach {
                Some(e) if e >= &hi => break,
                Some(e) if e >= &lo => match k.ceil_point(e) {
                    Some(c) if &c == e => e.clone(),
                    Some(c) => c,
                    None => break,
                },
                _ => lo.clone(),
            };
            reach = Some(&start + &two * rad);
            balls.push(Ball { center: &start + rad, radius: rad.clone() });
        }
    }
    balls
}

/// Exceptional set F, realized contraction rate and exact ball cover of
/// forward_word(n)(K ∖ F^ε). λ_fit = ln(D_0/D_n)/n where D_0, D_n are the
/// largest diameters of the pieces (K∖F^ε) ∩ cell before and after; the
/// cover radius e^{−nλ_fit} = D_n/D_0 is exact.
pub fn global_contraction_report(t: &mut Trajectory<'_>, depth: u32, n: usize, eps: &Q, p_cap: usize) -> Result<ContractionReport> {
    if depth == 0 || n == 0 || !eps.is_positive() {
        return Err(Error::Argument("global_contraction_report needs depth, n ≥ 1 and eps > 0".into()));
    }
    let model = t.model();
    let k = model.space().clone();
    let w = t.forward_word(n);
    let wi = w.invert();
    let delta = default_delta(&k);
    let scan = contraction_scan(t, depth, n, &delta)?;
    let mut probes = cell_midpoints(&k, depth);
    probes.extend(generator_breaks(model.gens()));
    let mut cand: Vec<Q> = probes.iter().map(|p| wi.apply_member(p)).collect();
    let breaks = break_accumulation(t, n, eps)?;
    cand.extend(breaks.tail_representatives.iter().cloned());
    let mut f: Vec<Q> = clusters(&cand, eps).iter().map(|c| representative(c)).collect();
    for c in scan.cells.iter().filter(|c| c.class == CellClass::Repulsor) {
        if !f.iter().any(|p| &c.cell.0 <= p && p <= &c.cell.1) {
            f.push(k.ceil_point(&((&c.cell.0 + &c.cell.1) / Q::from_integer(2.into()))).expect("cell meets K"));
        }
    }
    f.sort();
    f.dedup();
    let mut report = ContractionReport {
        f: f.clone(),
        p: None,
        lambda_fit: 0.0,
        cover: Vec::new(),
        sup_slope_off_f: f64::NAN,
        repulsors: scan.repulsors,
        repulsor_bound_holds: scan.bound_holds,
        failure: None,
    };
    if f.len() > p_cap {
        report.failure = Some(format!("|F| = {} exceeds the cap {p_cap}", f.len()));
        return Ok(report);
    }
    let off = k.complement(&k.epsilon_neighborhood(&PointSet::from_members(f), eps)?);
    if k.region_is_empty(&off) {
        report.p = Some(0);
        report.failure = Some("F^ε covers K".into());
        return Ok(report);
    }
    report.sup_slope_off_f = rational::to_f64(&w.slope_range(&off)?.1);
    let mut d0 = Q::zero();
    let mut dn = Q::zero();
    for c in k.cells(depth) {
        let piece = off.intersect(&Region::closed(c.lo.clone(), c.hi.clone()));
        if k.region_is_empty(&piece) {
            continue;
        }
        d0 = d0.max(k.region_diam(&piece));
        dn = dn.max(k.region_diam(&w.image(&piece)));
    }
    if d0.is_zero() || dn >= d0 {
        report.failure = Some("no contraction off F^ε".into());
        return Ok(report);
    }
    let rad = if dn.is_zero() { Q::zero() } else { &dn / &d0 };
    report.lambda_fit = if dn.is_zero() { f64::INFINITY } else { (rational::ln_abs(&d0) - rational::ln_abs(&dn)) / n as f64 };
    let img = w.image(&off);
    let cover = greedy_cover(&k, &img, &rad);
    let union = Region::from_spans(cover.iter().map(|b| Span::closed(&b.center - &b.radius, &b.center + &b.radius)).collect());
    if !k.region_subset(&img, &union) {
        report.failure = Some("ball cover failed verification".into());
        return Ok(report);
    }
    report.p = Some(cover.len());
    if cover.len() > p_cap {
        report.failure = Some(format!("{} balls exceed the cap {p_cap}", cover.len()));
        report.p = None;
    }
    report.cover = cover;
    Ok(report)
}

/// Exhaustive check that words of length n give the same multiset of maps
/// read forward and backward.
pub fn law_equality(model: &WalkModel, n: usize) -> bool {
    let g = model.gens();
    let id = PAHomeo::identity(model.space().clone());
    let mut fw = vec![id.clone()];
    let mut bw = vec![id];
    for _ in 0..n {
        fw = fw.iter().flat_map(|w| g.iter().map(move |s| s.compose(w).expect("shared space"))).collect();
        bw = bw.iter().flat_map(|w| g.iter().map(move |s| w.compose(s).expect("shared space"))).collect();
    }
    let mut a: Vec<_> = fw.iter().map(|w| w.canonical()).collect();
    let mut b: Vec<_> = bw.iter().map(|w| w.canonical()).collect();
    a.sort();
    b.sort();
    a == b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use crate::walk::model::*;
    use proptest::prelude::*;

    #[test]
    fn slope_and_clusters() {
        assert!((ls_slope(3, &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-12);
        let c = clusters(&[q(0, 1), q(1, 10), q(1, 2), q(1, 20)], &q(1, 10));
        assert_eq!(c, vec![vec![q(0, 1), q(1, 20), q(1, 10)], vec![q(1, 2)]]);
        assert_eq!(representative(&c[0]), q(1, 20));
    }

    #[test]
    fn pair_examples() {
        let m = klein_model(1);
        let mut t = m.trajectory(0);
        let v = classify_pair(&mut t, &qi(0), &qi(0), &q(1, 9), 10).unwrap();
        assert_eq!(v.class, PairClass::Synchronized);
        let v = classify_pair(&mut t, &qi(0), &qi(1), &q(1, 9), 30).unwrap();
        assert_eq!(v.class, PairClass::Separated);
        assert!(classify_pair(&mut t, &q(1, 2), &qi(1), &q(1, 9), 3).is_err());
        let f = free_model(3);
        let d = dichotomy(&f, &[(qi(0), q(1, 9)), (q(2, 9), qi(1))], &q(1, 9), 60).unwrap();
        assert_eq!(d.synchronized + d.separated + d.undecided, 2);
    }

    #[test]
    fn scan_examples() {
        let s = contraction_scan(&mut identity_model(0).trajectory(0), 2, 10, &q(1, 9)).unwrap();
        assert!(s.cells.iter().all(|c| c.class == CellClass::Undecided));
        let s = contraction_scan(&mut g3_model(0).trajectory(0), 2, 30, &q(1, 9)).unwrap();
        let classes: Vec<CellClass> = s.cells.iter().map(|c| c.class).collect();
        use CellClass::*;
        assert_eq!(classes, vec![Attractor, Attractor, Attractor, Repulsor]);
        assert_eq!(s.cells[3].cell, (q(8, 9), qi(1)));
        assert!(s.bound_holds);
    }

    #[test]
    fn break_examples() {
        let b = break_accumulation(&mut g3_model(0).trajectory(0), 12, &q(1, 27)).unwrap();
        assert!(b.points.is_empty());
        let b = break_accumulation(&mut h_model(0).trajectory(0), 1, &q(1, 27)).unwrap();
        assert_eq!(b.points, vec![qi(0), q(1, 3), q(2, 3), qi(1)]);
        assert!(b.inclusion_verified);
    }

    #[test]
    fn backward_and_sums() {
        let r = backward_cluster(&identity_model(0), &q(2, 9), 10, 3, &q(1, 81)).unwrap();
        assert_eq!(r.counts, vec![1, 1, 1]);
        let r = backward_cluster(&g3_model(0), &qi(0), 10, 2, &q(1, 81)).unwrap();
        assert_eq!(r.max, 1);
        let s = delta_sum_statistic(&identity_model(0), &[qi(0), qi(1)], 60, 2).unwrap();
        assert_eq!(s.mean, 61.0);
        assert_eq!(s.increment, 1.0);
        assert!(delta_sum_statistic(&identity_model(0), &[qi(0), qi(0)], 4, 1).is_err());
        assert!(delta_sum_statistic(&identity_model(0), &[qi(0)], 4, 1).is_err());
    }

    #[test]
    fn proximality_controls() {
        assert!(proximality_degree(&identity_model(0), 1, 4, 10).is_err());
        let r = proximality_degree(&identity_model(0), 3, 4, 20).unwrap();
        assert_eq!(r.m_estimate, None);
        let r = proximality_degree(&klein_model(0), 2, 6, 20).unwrap();
        assert_eq!(r.m_estimate, None);
        assert!(r.delta_sum_mean >= 0.0);
        let r = proximality_degree(&free_model(0), 2, 6, 60).unwrap();
        assert_eq!(r.m_estimate, Some(2));
    }

    #[test]
    fn global_report_examples() {
        let g = g3_model(0);
        let r = global_contraction_report(&mut g.trajectory(0), 2, 20, &q(1, 9), 4).unwrap();
        assert_eq!(r.f.len(), 1);
        assert!(qi(1) - &r.f[0] < q(1, 1_000_000));
        assert_eq!(r.p, Some(1));
        assert!(r.sup_slope_off_f < 1e-6);
        let r = global_contraction_report(&mut identity_model(0).trajectory(0), 2, 10, &q(1, 27), 4).unwrap();
        assert_eq!(r.p, None);
        assert!(r.failure.is_some());
    }

    #[test]
    fn laws_agree() {
        assert!(law_equality(&free_model(0), 4));
        assert!(law_equality(&WalkModel::uniform(vec![crate::fixtures::g3(), crate::fixtures::h()], 0).unwrap(), 5));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn break_inclusion_along_trajectories(seed in any::<u64>()) {
            let m = free_model(seed);
            let b = break_accumulation(&mut m.trajectory(seed), 10, &q(1, 27)).unwrap();
            prop_assert!(b.inclusion_verified);
        }

        #[test]
        fn reports_are_deterministic(seed in any::<u64>()) {
            let m = free_model(seed);
            let a = contraction_scan(&mut m.run(0), 2, 8, &q(1, 9)).unwrap();
            let b = contraction_scan(&mut m.run(0), 2, 8, &q(1, 9)).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.bound_holds);
            let x = backward_cluster(&m, &qi(0), 8, 3, &q(1, 81)).unwrap();
            let y = backward_cluster(&m, &qi(0), 8, 3, &q(1, 81)).unwrap();
            prop_assert_eq!(x, y);
        }
    }
}
