use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PAHomeo;
use crate::rational::Q;
use crate::space::{CompactSet, PointSet, Region};
use crate::walk::{cell_midpoints, clusters, convex_pieces, generator_breaks, WalkModel};

use super::morse::{fixed_points, snap};
use super::words::{find_displacement, find_finite_orbit, Displacement, ORBIT_BOUND};

pub const DEFAULT_P_CAP: usize = 4;

/// Depth of the cell midpoints pulled back to locate the repelling set.
const PROBE_DEPTH: u32 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Contraction {
    pub g: PAHomeo,
    pub a: PointSet,
    pub b: PointSet,
    pub eps: Q,
    pub run: usize,
    pub n: usize,
}

/// Exact check of g(K ∖ A^ε) ⊆ B^ε.
pub fn contraction_holds(g: &PAHomeo, a: &PointSet, b: &PointSet, eps: &Q) -> Result<bool> {
    let k = g.space();
    if a.is_empty() || b.is_empty() {
        return Ok(false);
    }
    let off = k.complement(&k.epsilon_neighborhood(a, eps)?);
    Ok(k.region_subset(&g.image(&off), &k.epsilon_neighborhood(b, eps)?))
}

/// Greedy cover of K ∩ r by open ε-balls centred at points of K.
fn ball_centers(k: &CompactSet, r: &Region, eps: &Q) -> Vec<Q> {
    let half = eps / Q::from_integer(2.into());
    let mut centers: Vec<Q> = Vec::new();
    let mut reach: Option<Q> = None;
    for (lo, hi) in convex_pieces(k, r) {
        loop {
            let start = match &reach {
                Some(e) if e > &hi => break,
                Some(e) if e >= &lo => match k.ceil_point(e) {
                    Some(c) if c <= hi => c,
                    _ => break,
                },
                _ => lo.clone(),
            };
            let c = k.floor_point(&(&start + &half)).expect("start lies in K");
            reach = Some(&c + eps);
            centers.push(c);
        }
    }
    centers
}

fn b_for(g: &PAHomeo, a: &PointSet, eps: &Q, p_cap: usize) -> Result<Option<PointSet>> {
    let k = g.space();
    let off = k.complement(&k.epsilon_neighborhood(a, eps)?);
    if k.region_is_empty(&off) {
        return Ok(None);
    }
    let centers = ball_centers(k, &g.image(&off), eps);
    if centers.is_empty() || centers.len() > p_cap {
        return Ok(None);
    }
    let b0 = PointSet::from_members(centers);
    let b = snap(&b0, &fixed_points(g), eps, true);
    for cand in [b, b0] {
        if cand.len() <= p_cap && contraction_holds(g, a, &cand, eps)? {
            return Ok(Some(cand));
        }
    }
    Ok(None)
}

/// Finite sets A, B of equal size ≤ p_cap with g(K ∖ A^ε) ⊆ B^ε, built from the
/// pulled-back probes and a greedy cover of the image, snapped to fixed
/// points of g where possible.
pub fn contraction_candidate(g: &PAHomeo, gens: &[PAHomeo], eps: &Q, p_cap: usize) -> Result<Option<(PointSet, PointSet)>> {
    let k = g.space();
    let gi = g.invert();
    let mut probes = cell_midpoints(k, PROBE_DEPTH);
    probes.extend(generator_breaks(gens));
    let pulled: Vec<Q> = probes.iter().map(|p| gi.apply_member(p)).collect();
    let cl = clusters(&pulled, eps);
    if cl.len() > p_cap {
        return Ok(None);
    }
    let a0 = PointSet::from_members(cl.iter().map(|c| c[c.len() / 2].clone()).collect());
    let a = snap(&a0, &fixed_points(g), eps, false);
    for cand in [a, a0] {
        if let Some(b) = b_for(g, &cand, eps, p_cap)? {
            if b.len() == cand.len() {
                return Ok(Some((cand, b)));
            }
        }
    }
    Ok(None)
}

fn check_eps(eps: &Q, k: &CompactSet) -> Result<()> {
    if !eps.is_positive() || eps >= &k.diam() {
        return Err(Error::Argument("eps must lie in (0, diam K)".into()));
    }
    Ok(())
}

/// First (run, n) in run-major order whose forward words at n and n + 1
/// both admit contraction pairs of the same size that cluster together at
/// radius ε. The pair and word at n + 1 are returned.
pub fn find_contraction(model: &WalkModel, eps: &Q, p_cap: usize, n_max: usize, runs: usize) -> Result<Option<Contraction>> {
    check_eps(eps, model.space())?;
    if p_cap == 0 || n_max == 0 || runs == 0 {
        return Err(Error::Argument("find_contraction needs p_cap, n_max, runs ≥ 1".into()));
    }
    for run in 0..runs {
        let mut t = model.run(run as u64);
        let mut prev: Option<(PointSet, PointSet)> = None;
        for n in 1..=n_max + 1 {
            let g = t.forward_word(n);
            let cur = if g.is_identity() { None } else { contraction_candidate(&g, model.gens(), eps, p_cap)? };
            if let (Some(p), Some(c)) = (&prev, &cur) {
                if p.0.len() == c.0.len() {
                    let s = stabilize_contraction_pair(&[p.clone(), c.clone()], eps)?;
                    if !s.mismatch && s.a.len() == c.0.len() && s.b.len() == c.1.len() {
                        let (a, b) = c.clone();
                        return Ok(Some(Contraction { g, a, b, eps: eps.clone(), run, n }));
                    }
                }
            }
            prev = cur;
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stabilized {
    pub a: PointSet,
    pub b: PointSet,
    /// The pooled samples of A and B fall into different numbers of clusters.
    pub mismatch: bool,
}

fn pooled(samples: &[&PointSet], radius: &Q) -> Vec<Q> {
    let mut tagged: Vec<(Q, usize)> = samples.iter().enumerate().flat_map(|(i, s)| s.points().iter().map(move |x| (x.clone(), i))).collect();
    tagged.sort();
    let mut reps: Vec<Q> = Vec::new();
    let mut cur: Option<(Q, usize, Q)> = None;
    for (x, i) in tagged {
        cur = match cur {
            Some((last, bi, rep)) if &x - &last <= *radius => {
                if i >= bi {
                    Some((x.clone(), i, x))
                } else {
                    Some((x, bi, rep))
                }
            }
            Some((_, _, rep)) => {
                reps.push(rep);
                Some((x.clone(), i, x))
            }
            None => Some((x.clone(), i, x)),
        };
    }
    if let Some((_, _, rep)) = cur {
        reps.push(rep);
    }
    reps
}

/// Pools successive contraction pairs, clusters at `radius` and keeps the
/// most recent sample of each cluster.
pub fn stabilize_contraction_pair(pairs: &[(PointSet, PointSet)], radius: &Q) -> Result<Stabilized> {
    if pairs.is_empty() || !radius.is_positive() {
        return Err(Error::Argument("stabilize needs samples and a positive radius".into()));
    }
    let p = pairs[0].0.len();
    if pairs.iter().any(|(a, b)| a.len() != p || b.len() != p) {
        return Err(Error::Argument("contraction pairs have inconsistent cardinalities".into()));
    }
    let a = pooled(&pairs.iter().map(|p| &p.0).collect::<Vec<_>>(), radius);
    let b = pooled(&pairs.iter().map(|p| &p.1).collect::<Vec<_>>(), radius);
    Ok(Stabilized {
        mismatch: a.len() != b.len(),
        a: PointSet::from_members(a),
        b: PointSet::from_members(b),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PingPongCandidate {
    pub a1: PAHomeo,
    pub a2: PAHomeo,
    pub regions: [Region; 4],
}

impl PingPongCandidate {
    pub const REGION_NAMES: [&'static str; 4] = ["A1", "B1", "A2", "B2"];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub ok: bool,
    pub reason: Option<String>,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict { ok: true, reason: None }
    }

    pub fn fail(reason: impl Into<String>) -> Self {
        Verdict { ok: false, reason: Some(reason.into()) }
    }
}

/// Exact ping-pong check: four nonempty pairwise disjoint regions with
/// a_i(K ∖ A_i) ⊆ B_i.
pub fn verify_ping_pong(c: &PingPongCandidate) -> Verdict {
    let k = c.a1.space();
    if !k.same_set(c.a2.space()) {
        return Verdict::fail("generators act on different spaces");
    }
    let names = PingPongCandidate::REGION_NAMES;
    for (i, r) in c.regions.iter().enumerate() {
        if k.region_is_empty(r) {
            return Verdict::fail(format!("{} misses K", names[i]));
        }
    }
    for i in 0..4 {
        for j in i + 1..4 {
            if !k.region_disjoint(&c.regions[i], &c.regions[j]) {
                return Verdict::fail(format!("{} and {} intersect", names[i], names[j]));
            }
        }
    }
    for (g, ai, bi, name) in [(&c.a1, 0, 1, "a1"), (&c.a2, 2, 3, "a2")] {
        let img = g.image(&k.complement(&c.regions[ai]));
        if !k.region_subset(&img, &c.regions[bi]) {
            return Verdict::fail(format!("{name}(K ∖ {}) is not contained in {}", names[ai], names[bi]));
        }
    }
    Verdict::pass()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Contraction,
    Displacement,
    Assembly,
    Verification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub max_len: usize,
    pub runs: usize,
    pub d_max: u32,
    pub n_max: usize,
    pub p_cap: usize,
    /// Times ε is divided by 3 while assembling.
    pub shrink_steps: u32,
    pub max_power: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { max_len: 6, runs: 100, d_max: 6, n_max: 40, p_cap: DEFAULT_P_CAP, shrink_steps: 4, max_power: 8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assembly {
    pub certificate: Option<PingPongCandidate>,
    pub failed_stage: Option<Stage>,
    /// A finite orbit found while diagnosing a failure.
    pub finite_orbit: Option<Vec<Q>>,
    pub contraction: Option<Contraction>,
    pub note: Option<String>,
}

impl Assembly {
    fn failed(stage: Stage, contraction: Option<Contraction>, note: impl Into<String>) -> Self {
        Assembly { certificate: None, failed_stage: Some(stage), finite_orbit: None, contraction, note: Some(note.into()) }
    }
}

/// Consecutive words after the first hit pooled by the stabilizer.
const STABILIZE_SAMPLES: usize = 3;

fn stabilized(model: &WalkModel, c: &Contraction, p_cap: usize) -> Result<(PAHomeo, PointSet, PointSet)> {
    let mut t = model.run(c.run as u64);
    let mut samples = vec![(c.a.clone(), c.b.clone())];
    let mut words = vec![c.g.clone()];
    for n in c.n + 1..=c.n + STABILIZE_SAMPLES {
        let g = t.forward_word(n);
        match contraction_candidate(&g, model.gens(), &c.eps, p_cap)? {
            Some(pair) if pair.0.len() == c.a.len() => {
                samples.push(pair);
                words.push(g);
            }
            _ => break,
        }
    }
    let s = stabilize_contraction_pair(&samples, &c.eps)?;
    if !s.mismatch {
        for g in words.iter().rev() {
            if contraction_holds(g, &s.a, &s.b, &c.eps)? {
                return Ok((g.clone(), s.a, s.b));
            }
        }
    }
    Ok((c.g.clone(), c.a.clone(), c.b.clone()))
}

fn screen_orbit(model: &WalkModel) -> Result<Option<Vec<Q>>> {
    let k = model.space();
    Ok(find_finite_orbit(model.gens(), &[k.lo().clone(), k.hi().clone()], ORBIT_BOUND)?.map(|c| c.orbit))
}

fn displacement(model: &WalkModel, a: &PointSet, b: &PointSet, max_len: usize, stage_note: &str) -> Result<std::result::Result<PAHomeo, Assembly>> {
    Ok(match find_displacement(model.gens(), a, b, max_len)? {
        Displacement::Found(u) => Ok(u),
        Displacement::FiniteOrbit(o) => {
            let mut f = Assembly::failed(Stage::Displacement, None, format!("{stage_note}: finite orbit"));
            f.finite_orbit = Some(o.points().to_vec());
            Err(f)
        }
        Displacement::BudgetExhausted => Err(Assembly::failed(Stage::Displacement, None, format!("{stage_note}: budget exhausted"))),
    })
}

/// Contraction, displacement and conjugation into a verified ping-pong pair.
pub fn assemble_free_pair(model: &WalkModel, eps: &Q, budgets: &Budgets) -> Result<Assembly> {
    check_eps(eps, model.space())?;
    let k = model.space();
    let Some(c) = find_contraction(model, eps, budgets.p_cap, budgets.n_max, budgets.runs)? else {
        let mut f = Assembly::failed(Stage::Contraction, None, "no contracting word within budget");
        f.finite_orbit = screen_orbit(model)?;
        return Ok(f);
    };
    let (g, a, b) = stabilized(model, &c, budgets.p_cap)?;
    let u = match displacement(model, &a, &b, budgets.max_len, "displacing A off B")? {
        Ok(u) => u,
        Err(mut f) => {
            f.contraction = Some(c);
            return Ok(f);
        }
    };
    let p1 = PointSet::from_members(a.points().iter().map(|x| u.apply_member(x)).collect()).union(&b);
    let v = match displacement(model, &p1, &p1, budgets.max_len, "displacing u(A) ∪ B off itself")? {
        Ok(v) => v,
        Err(mut f) => {
            f.contraction = Some(c);
            return Ok(f);
        }
    };
    let ui = u.invert();
    let vi = v.invert();
    let mut last = String::from("no power of g contracts at any tried scale");
    let mut e = eps.clone();
    for _ in 0..=budgets.shrink_steps {
        let mut gj = g.clone();
        let mut power = None;
        for _ in 1..=budgets.max_power {
            if contraction_holds(&gj, &a, &b, &e)? {
                power = Some(gj.clone());
                break;
            }
            gj = g.compose(&gj)?;
        }
        if let Some(gj) = power {
            let a1 = gj.compose(&ui)?;
            let big_a1 = u.image(&k.epsilon_neighborhood(&a, &e)?);
            let big_b1 = k.epsilon_neighborhood(&b, &e)?;
            let a2 = v.compose(&a1)?.compose(&vi)?;
            let big_a2 = v.image(&big_a1);
            let big_b2 = v.image(&big_b1);
            let cand = PingPongCandidate { a1, a2, regions: [big_a1, big_b1, big_a2, big_b2] };
            let verdict = verify_ping_pong(&cand);
            if verdict.ok {
                return Ok(Assembly { certificate: Some(cand), failed_stage: None, finite_orbit: None, contraction: Some(c), note: None });
            }
            last = verdict.reason.unwrap_or_default();
        }
        e = &e / Q::from_integer(3.into());
    }
    let stage = if last.contains("contained") { Stage::Verification } else { Stage::Assembly };
    Ok(Assembly::failed(stage, Some(c), last))
}

/// ε used when a caller gives none: diam(K)/27.
pub fn default_eps(k: &CompactSet) -> Q {
    k.diam() / Q::from_integer(27.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::rational::{q, qi};
    use crate::walk::{free_model, g3_model, klein_model};

    fn region_of_points(k: &CompactSet, pts: &[Q], eps: &Q) -> Result<Region> {
        k.epsilon_neighborhood(&PointSet::from_members(pts.to_vec()), eps)
    }

    #[test]
    fn contraction_examples() {
        let eps = q(1, 9);
        let a = PointSet::from_members(vec![qi(1)]);
        let b = PointSet::from_members(vec![qi(0)]);
        assert!(!contraction_holds(&g3(), &a, &b, &eps).unwrap());
        assert!(contraction_holds(&g3().pow(3), &a, &b, &eps).unwrap());
        let c = find_contraction(&g3_model(0), &eps, 4, 20, 1).unwrap().unwrap();
        assert_eq!((c.a.points(), c.b.points()), (&[qi(1)][..], &[qi(0)][..]));
        assert!(contraction_holds(&c.g, &c.a, &c.b, &eps).unwrap());
        assert!(find_contraction(&klein_model(0), &eps, 4, 20, 2).unwrap().is_none());
        assert!(find_contraction(&g3_model(0), &qi(0), 4, 20, 1).is_err());
    }

    #[test]
    fn stabilize_keeps_latest() {
        let p = |v: Vec<Q>| PointSet::from_members(v);
        let s = stabilize_contraction_pair(
            &[(p(vec![q(80, 81)]), p(vec![q(2, 81)])), (p(vec![qi(1)]), p(vec![qi(0)]))],
            &q(1, 9),
        )
        .unwrap();
        assert_eq!((s.a.points(), s.b.points()), (&[qi(1)][..], &[qi(0)][..]));
        assert!(!s.mismatch);
        let s = stabilize_contraction_pair(&[(p(vec![qi(0), qi(1)]), p(vec![q(1, 3), q(2, 3)]))], &q(1, 3)).unwrap();
        assert!(s.mismatch);
        assert!(stabilize_contraction_pair(&[(p(vec![qi(0)]), p(vec![qi(1)])), (p(vec![qi(0), qi(1)]), p(vec![qi(1)]))], &q(1, 9)).is_err());
        let walk: Vec<(PointSet, PointSet)> = (3..=8).map(|n| (p(vec![qi(1) - q(1, 3i64.pow(n))]), p(vec![qi(0)]))).collect();
        let s = stabilize_contraction_pair(&walk, &q(1, 9)).unwrap();
        assert_eq!(s.a.points(), &[qi(1) - q(1, 6561)]);
    }

    #[test]
    fn ping_pong_rejects_overlap() {
        let k = ternary();
        let r = |a: Q| region_of_points(&k, &[a], &q(1, 9)).unwrap();
        let c = PingPongCandidate { a1: a1(), a2: a2(), regions: [r(qi(1)), r(qi(1)), r(q(2, 9)), r(q(2, 3))] };
        let v = verify_ping_pong(&c);
        assert_eq!(v.reason.as_deref(), Some("A1 and B1 intersect"));
    }

    #[test]
    fn assembles_for_free_model() {
        let out = assemble_free_pair(&free_model(0), &q(1, 27), &Budgets::default()).unwrap();
        let cert = out.certificate.expect("free pair");
        assert!(verify_ping_pong(&cert).ok);
        let out = assemble_free_pair(&klein_model(0), &q(1, 27), &Budgets { runs: 3, n_max: 10, ..Budgets::default() }).unwrap();
        assert_eq!(out.failed_stage, Some(Stage::Contraction));
        assert_eq!(out.finite_orbit.unwrap().len(), 4);
    }
}
