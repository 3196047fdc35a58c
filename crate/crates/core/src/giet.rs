//! Generalized interval exchanges of [a, b) with increasing affine branches,
//! and their blow-up into homeomorphisms of a compact set.

use std::collections::HashSet;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{Branch, PAHomeo};
use crate::rational::{self, Q};
use crate::space::CompactSet;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GietBranch {
    /// Half-open source [lo, hi).
    #[serde(with = "rational::qpair")]
    pub src: (Q, Q),
    #[serde(with = "rational::qstr")]
    pub slope: Q,
    #[serde(with = "rational::qstr")]
    pub offset: Q,
}

impl GietBranch {
    pub fn new(lo: Q, hi: Q, slope: Q, offset: Q) -> Self {
        GietBranch { src: (lo, hi), slope, offset }
    }

    fn eval(&self, x: &Q) -> Q {
        &self.slope * x + &self.offset
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Giet {
    #[serde(with = "rational::qpair")]
    pub interval: (Q, Q),
    pub branches: Vec<GietBranch>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Giet {
    pub fn from_branches(interval: (Q, Q), mut branches: Vec<GietBranch>, name: &str) -> Result<Self> {
        let (a, b) = interval.clone();
        if a >= b {
            return Err(Error::InvalidMap("GIET interval must have a < b".into()));
        }
        if branches.is_empty() {
            return Err(Error::InvalidMap("GIET needs branches".into()));
        }
        if branches.iter().any(|br| br.slope <= Q::zero()) {
            return Err(Error::InvalidMap("GIET branches must be increasing".into()));
        }
        if branches.iter().any(|br| br.src.0 >= br.src.1) {
            return Err(Error::InvalidMap("empty GIET source".into()));
        }
        branches.sort_by(|x, y| x.src.0.cmp(&y.src.0));
        let tiles = |pieces: &[(Q, Q)], what: &str| -> Result<()> {
            if pieces[0].0 != a || pieces[pieces.len() - 1].1 != b {
                return Err(Error::InvalidMap(format!("{what} do not tile [a,b)")));
            }
            for w in pieces.windows(2) {
                if w[0].1 != w[1].0 {
                    let why = if w[1].0 < w[0].1 { "overlap" } else { "leave holes" };
                    return Err(Error::InvalidMap(format!("{what} {why}")));
                }
            }
            Ok(())
        };
        let srcs: Vec<(Q, Q)> = branches.iter().map(|br| br.src.clone()).collect();
        tiles(&srcs, "sources")?;
        let mut imgs: Vec<(Q, Q)> = branches.iter().map(|br| (br.eval(&br.src.0), br.eval(&br.src.1))).collect();
        imgs.sort();
        tiles(&imgs, "images")?;
        Ok(Giet { interval, branches, name: name.to_string() })
    }

    pub fn a(&self) -> &Q {
        &self.interval.0
    }

    pub fn b(&self) -> &Q {
        &self.interval.1
    }

    pub fn is_iet(&self) -> bool {
        self.branches.iter().all(|br| br.slope.is_one())
    }

    fn branch_right(&self, x: &Q) -> &GietBranch {
        let i = self.branches.partition_point(|br| &br.src.0 <= x);
        &self.branches[i.max(1) - 1]
    }

    fn branch_left(&self, x: &Q) -> &GietBranch {
        let i = self.branches.partition_point(|br| &br.src.0 < x);
        &self.branches[i.max(1) - 1]
    }

    /// g(x) = g(x⁺) for x ∈ [a, b).
    pub fn apply(&self, x: &Q) -> Q {
        self.branch_right(x).eval(x)
    }

    /// g(x⁻) for x ∈ (a, b].
    pub fn left_limit(&self, x: &Q) -> Q {
        self.branch_left(x).eval(x)
    }

    pub fn limit(&self, x: &Q, side: Side) -> Q {
        match side {
            Side::Left => self.left_limit(x),
            Side::Right => self.apply(x),
        }
    }

    pub fn inverse(&self) -> Giet {
        let mut bs: Vec<GietBranch> = self
            .branches
            .iter()
            .map(|br| {
                let s = Q::one() / &br.slope;
                GietBranch::new(br.eval(&br.src.0), br.eval(&br.src.1), s.clone(), -(&br.offset) * s)
            })
            .collect();
        bs.sort_by(|x, y| x.src.0.cmp(&y.src.0));
        Giet { interval: self.interval.clone(), branches: bs, name: crate::maps::inverse_name(&self.name) }
    }

    /// Interior points where the two one-sided values differ.
    pub fn discontinuities(&self) -> Vec<Q> {
        self.branches[1..]
            .iter()
            .map(|br| br.src.0.clone())
            .filter(|c| self.left_limit(c) != self.apply(c))
            .collect()
    }

    /// Interior branch boundaries, continuous or not.
    fn breakpoints(&self) -> Vec<Q> {
        self.branches[1..].iter().map(|br| br.src.0.clone()).collect()
    }
}

fn alphabet(gens: &[Giet]) -> Vec<Giet> {
    let mut all: Vec<Giet> = Vec::new();
    for g in gens {
        for h in [g.clone(), g.inverse()] {
            if !all.iter().any(|x| x.branches == h.branches) {
                all.push(h);
            }
        }
    }
    all.sort_by(|x, y| x.name.cmp(&y.name));
    all
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscontinuityClosure {
    /// Points in discovery order (seeds sorted first, then BFS by level
    /// and letter order).
    pub points: Vec<Q>,
    pub closed: bool,
}

impl DiscontinuityClosure {
    pub fn sorted(&self) -> Vec<Q> {
        let mut v = self.points.clone();
        v.sort();
        v
    }
}

pub fn discontinuity_closure(gens: &[Giet], l: usize) -> Result<DiscontinuityClosure> {
    check_common_interval(gens)?;
    let letters = alphabet(gens);
    let mut seeds: Vec<Q> = letters.iter().flat_map(|g| g.discontinuities()).collect();
    seeds.sort();
    seeds.dedup();
    let mut seen: HashSet<Q> = seeds.iter().cloned().collect();
    let mut points = seeds.clone();
    let mut frontier = seeds;
    let mut closed = frontier.is_empty();
    for level in 0..=l {
        let mut next = Vec::new();
        for p in &frontier {
            for g in &letters {
                let y = g.apply(p);
                if seen.insert(y.clone()) {
                    next.push(y);
                }
            }
        }
        if next.is_empty() {
            closed = true;
            break;
        }
        if level == l {
            // one probe step beyond the horizon found new points
            closed = false;
            break;
        }
        points.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(DiscontinuityClosure { points, closed })
}

fn check_common_interval(gens: &[Giet]) -> Result<()> {
    if gens.is_empty() {
        return Err(Error::Argument("no GIET generators".into()));
    }
    if gens.iter().any(|g| g.interval != gens[0].interval) {
        return Err(Error::Argument("GIET generators act on different intervals".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SidedOrbit {
    pub base: Q,
    pub side: Side,
    pub points: Vec<Q>,
    pub closed: bool,
}

/// Orbit of the one-sided limit x⁻ or x⁺, breadth first over words of
/// length ≤ bound.
pub fn one_sided_orbit(gens: &[Giet], x: &Q, side: Side, bound: usize) -> Result<SidedOrbit> {
    check_common_interval(gens)?;
    let (a, b) = (gens[0].a(), gens[0].b());
    if x < a || x > b {
        return Err(Error::Argument("base point outside [a,b]".into()));
    }
    if (x == a && side == Side::Left) || (x == b && side == Side::Right) {
        return Err(Error::Argument("that side of an endpoint is undefined".into()));
    }
    let letters = alphabet(gens);
    let mut seen: HashSet<Q> = HashSet::from([x.clone()]);
    let mut points = vec![x.clone()];
    let mut frontier = vec![x.clone()];
    let mut closed = false;
    for _ in 0..bound {
        let mut next = Vec::new();
        for p in &frontier {
            for g in &letters {
                let y = g.limit(p, side);
                if seen.insert(y.clone()) {
                    next.push(y);
                }
            }
        }
        if next.is_empty() {
            closed = true;
            break;
        }
        points.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(SidedOrbit { base: x.clone(), side, points, closed })
}

/// The monotone map f(x) = x + Σ_{c ≤ x} α_c.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conjugacy {
    /// (c, α_c) sorted by c.
    pub jumps: Vec<(Q, Q)>,
}

impl Conjugacy {
    pub fn eval(&self, x: &Q) -> Q {
        let k = self.jumps.partition_point(|(c, _)| c <= x);
        x + self.jumps[..k].iter().fold(Q::zero(), |s, (_, w)| s + w)
    }

    /// f(x⁻) = x + Σ_{c < x} α_c.
    pub fn eval_left(&self, x: &Q) -> Q {
        let k = self.jumps.partition_point(|(c, _)| c < x);
        x + self.jumps[..k].iter().fold(Q::zero(), |s, (_, w)| s + w)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    /// Points found one step past the horizon, i.e. the missing part of D.
    Approximate(Vec<Q>),
}

#[derive(Clone, Debug)]
pub struct BlowUpResult {
    pub space: Arc<CompactSet>,
    pub induced: Vec<PAHomeo>,
    pub conjugacy: Conjugacy,
    /// (c, α_c) in discovery order.
    pub blown_points: Vec<(Q, Q)>,
    pub exactness: Exactness,
}

pub fn blow_up(gens: &[Giet], l: usize, rho: &Q) -> Result<BlowUpResult> {
    if *rho <= Q::zero() || *rho >= Q::one() {
        return Err(Error::Argument("weight ratio must lie in (0,1)".into()));
    }
    let closure = discontinuity_closure(gens, l)?;
    let (a, b) = (gens[0].a().clone(), gens[0].b().clone());
    let len = &b - &a;
    let mut weight = rho.clone();
    let mut blown = Vec::with_capacity(closure.points.len());
    for c in &closure.points {
        blown.push((c.clone(), &weight * &len));
        weight *= rho;
    }
    let mut jumps = blown.clone();
    jumps.sort();
    let conj = Conjugacy { jumps };

    let mut cuts: Vec<Q> = closure.sorted();
    if cuts.first() != Some(&a) {
        cuts.insert(0, a.clone());
    }
    let mut comps = Vec::with_capacity(cuts.len());
    for (i, p) in cuts.iter().enumerate() {
        let next = cuts.get(i + 1).unwrap_or(&b);
        comps.push((conj.eval(p), conj.eval_left(next)));
    }
    let space = Arc::new(CompactSet::make(comps)?);

    let exactness = if closure.closed {
        Exactness::Exact
    } else {
        let probe = discontinuity_closure(gens, l + 1)?;
        let known: HashSet<&Q> = closure.points.iter().collect();
        Exactness::Approximate(probe.points.iter().filter(|p| !known.contains(p)).cloned().collect())
    };

    let mut induced = Vec::new();
    for g in gens {
        let mut cut_set: Vec<Q> = cuts.clone();
        cut_set.extend(g.breakpoints());
        cut_set.sort();
        cut_set.dedup();
        let mut bs = Vec::with_capacity(cut_set.len());
        for (i, l_pt) in cut_set.iter().enumerate() {
            let r_pt = cut_set.get(i + 1).unwrap_or(&b);
            let br = g.branch_right(l_pt);
            let shift_src = conj.eval(l_pt) - l_pt;
            let y = br.eval(l_pt);
            let shift_dst = conj.eval(&y) - &y;
            let offset = &br.offset - &br.slope * &shift_src + &shift_dst;
            bs.push(Branch::new(conj.eval(l_pt), conj.eval_left(r_pt), br.slope.clone(), offset));
        }
        let name = if g.name.is_empty() { Vec::new() } else { vec![g.name.clone()] };
        match PAHomeo::from_branches(space.clone(), bs, name) {
            Ok(m) => induced.push(m),
            Err(e) if closure.closed => return Err(e),
            Err(_) => {}
        }
    }
    if !closure.closed && induced.len() != gens.len() {
        induced.clear();
    }
    Ok(BlowUpResult { space, induced, conjugacy: conj, blown_points: blown, exactness })
}

/// Rotation x ↦ x + p/q mod 1 on [0, 1).
pub fn rotation(p: i64, q: i64) -> Giet {
    let t = rational::q(p, q);
    let one = Q::one();
    Giet::from_branches(
        (Q::zero(), one.clone()),
        vec![
            GietBranch::new(Q::zero(), &one - &t, one.clone(), t.clone()),
            GietBranch::new(&one - &t, one.clone(), one.clone(), &t - &one),
        ],
        &format!("rot{p}/{q}"),
    )
    .expect("rotation is an IET")
}

/// [0,1/2) ↔ [1/2,1).
pub fn swap_halves() -> Giet {
    let h = rational::q(1, 2);
    Giet::from_branches(
        (Q::zero(), Q::one()),
        vec![GietBranch::new(Q::zero(), h.clone(), Q::one(), h.clone()), GietBranch::new(h.clone(), Q::one(), Q::one(), -h)],
        "swap",
    )
    .expect("swap is an IET")
}
