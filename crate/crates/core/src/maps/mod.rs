//! Piecewise-affine homeomorphisms of a compact set K.
//!
//! A map is a sorted list of branches x ↦ a·x + b, each on a closed source
//! interval whose endpoints lie in K. Every bounded gap of K strictly inside
//! a source is sent to a bounded gap of K; this is checked at construction
//! and preserved by composition and inversion, and it is what makes images
//! of intervals computable branch by branch.

mod prefix;

pub use prefix::{PrefixRule, PrefixTable};

use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::space::{CompactSet, Region, Span};

/// Source depth used when validating explicit branches on IFS sets.
const MAX_CELL_DEPTH: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Branch {
    #[serde(with = "rational::qpair", rename = "source")]
    pub source: (Q, Q),
    #[serde(with = "rational::qstr")]
    pub slope: Q,
    #[serde(with = "rational::qstr")]
    pub offset: Q,
}

impl Branch {
    pub fn new(lo: Q, hi: Q, slope: Q, offset: Q) -> Self {
        Branch { source: (lo, hi), slope, offset }
    }

    pub fn lo(&self) -> &Q {
        &self.source.0
    }

    pub fn hi(&self) -> &Q {
        &self.source.1
    }

    pub fn eval(&self, x: &Q) -> Q {
        &self.slope * x + &self.offset
    }

    pub fn uneval(&self, y: &Q) -> Q {
        (y - &self.offset) / &self.slope
    }

    /// Image of the source, as a sorted pair.
    pub fn image(&self) -> (Q, Q) {
        let (a, b) = (self.eval(self.lo()), self.eval(self.hi()));
        if a <= b { (a, b) } else { (b, a) }
    }

    pub fn inverse(&self) -> Branch {
        let (lo, hi) = self.image();
        let slope = Q::one() / &self.slope;
        let offset = -(&self.offset) / &self.slope;
        Branch::new(lo, hi, slope, offset)
    }

    fn same_affine(&self, o: &Branch) -> bool {
        self.slope == o.slope && self.offset == o.offset
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BreakPair {
    pub a: Q,
    pub b: Q,
}

/// Letter names: "A1" and its inverse "A1^-1".
pub fn inverse_name(name: &str) -> String {
    match name.strip_suffix("^-1") {
        Some(base) => base.to_string(),
        None => format!("{name}^-1"),
    }
}

#[derive(Clone, Debug)]
pub struct PAHomeo {
    space: Arc<CompactSet>,
    branches: Vec<Branch>,
    label: Vec<String>,
}

impl PartialEq for PAHomeo {
    fn eq(&self, o: &Self) -> bool {
        self.space.same_set(&o.space) && self.canonical() == o.canonical()
    }
}

impl Eq for PAHomeo {}

impl PAHomeo {
    pub fn identity(space: Arc<CompactSet>) -> Self {
        let b = Branch::new(space.lo().clone(), space.hi().clone(), Q::one(), Q::zero());
        PAHomeo { space, branches: vec![b], label: Vec::new() }
    }

    /// Validated construction from explicit branches.
    pub fn from_branches(space: Arc<CompactSet>, branches: Vec<Branch>, label: Vec<String>) -> Result<Self> {
        let branches = validate(&space, branches)?;
        Ok(PAHomeo { space, branches, label })
    }

    pub(crate) fn from_trusted(space: Arc<CompactSet>, branches: Vec<Branch>, label: Vec<String>) -> Self {
        PAHomeo { space, branches, label }
    }

    pub fn space(&self) -> &Arc<CompactSet> {
        &self.space
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn label(&self) -> &[String] {
        &self.label
    }

    pub fn with_label(mut self, label: Vec<String>) -> Self {
        self.label = label;
        self
    }

    pub fn slopes(&self) -> Vec<Q> {
        self.branches.iter().map(|b| b.slope.clone()).collect()
    }

    /// Branch list with mergeable neighbours joined; two maps are equal on
    /// K iff their canonical lists agree.
    pub fn canonical(&self) -> Vec<Branch> {
        normalize(&self.space, self.branches.clone())
    }

    pub fn is_identity(&self) -> bool {
        self.branches.iter().all(|b| b.slope.is_one() && b.offset.is_zero())
    }

    fn branch_index(&self, x: &Q) -> Option<usize> {
        let i = self.branches.partition_point(|b| b.lo() <= x);
        (i > 0 && x <= self.branches[i - 1].hi()).then(|| i - 1)
    }

    pub fn branch_at(&self, x: &Q) -> Option<&Branch> {
        self.branch_index(x).map(|i| &self.branches[i])
    }

    pub fn apply(&self, x: &Q) -> Result<Q> {
        if !self.space.contains(x) {
            return Err(Error::NotInSpace(x.to_string()));
        }
        self.branch_at(x)
            .map(|b| b.eval(x))
            .ok_or_else(|| Error::InvalidMap(format!("no branch contains {x}")))
    }

    /// Evaluation for points already known to lie in K.
    pub fn apply_member(&self, x: &Q) -> Q {
        self.branch_at(x).expect("point of K lies in a branch").eval(x)
    }

    /// |f′| on the branch containing x.
    pub fn slope_at(&self, x: &Q) -> Option<Q> {
        self.branch_at(x).map(|b| b.slope.abs())
    }

    pub fn image(&self, s: &Region) -> Region {
        let mut spans = Vec::new();
        for b in &self.branches {
            let piece = s.intersect(&Region::closed(b.lo().clone(), b.hi().clone()));
            spans.extend(piece.affine_image(&b.slope, &b.offset).spans().iter().cloned());
        }
        Region::from_spans(spans)
    }

    pub fn preimage(&self, s: &Region) -> Region {
        self.invert().image(s)
    }

    pub fn compose(&self, g: &PAHomeo) -> Result<PAHomeo> {
        if !Arc::ptr_eq(&self.space, &g.space) && !self.space.same_set(&g.space) {
            return Err(Error::SpaceMismatch);
        }
        let mut out = Vec::with_capacity(self.branches.len() + g.branches.len());
        for gb in &g.branches {
            let (u, v) = gb.image();
            let start = self.branches.partition_point(|fb| fb.hi() < &u);
            for fb in &self.branches[start..] {
                if fb.lo() > &v {
                    break;
                }
                let lo = rational::max_q(&u, fb.lo());
                let hi = rational::min_q(&v, fb.hi());
                let (a, b) = (gb.uneval(lo), gb.uneval(hi));
                let (s, t) = if a <= b { (a, b) } else { (b, a) };
                let slope = &fb.slope * &gb.slope;
                let offset = &fb.slope * &gb.offset + &fb.offset;
                out.push(Branch::new(s, t, slope, offset));
            }
        }
        out.sort();
        let mut label = self.label.clone();
        label.extend(g.label.iter().cloned());
        Ok(PAHomeo { space: self.space.clone(), branches: normalize(&self.space, out), label })
    }

    pub fn invert(&self) -> PAHomeo {
        let mut bs: Vec<Branch> = self.branches.iter().map(Branch::inverse).collect();
        bs.sort();
        let label = self.label.iter().rev().map(|s| inverse_name(s)).collect();
        PAHomeo { space: self.space.clone(), branches: bs, label }
    }

    pub fn pow(&self, n: u32) -> PAHomeo {
        let mut acc = PAHomeo::identity(self.space.clone());
        for _ in 0..n {
            acc = self.compose(&acc).expect("same space");
        }
        acc
    }

    /// Bounded gaps (a, b) of K whose image pair does not bound a gap.
    pub fn break_pairs(&self) -> Vec<BreakPair> {
        let mut out = Vec::new();
        for w in self.branches.windows(2) {
            let (x, y) = (w[0].hi(), w[1].lo());
            if x == y {
                continue;
            }
            let (fx, fy) = (w[0].eval(x), w[1].eval(y));
            let (p, q) = if fx < fy { (fx, fy) } else { (fy, fx) };
            if !self.space.is_gap(&p, &q) {
                out.push(BreakPair { a: x.clone(), b: y.clone() });
            }
        }
        out
    }

    pub fn break_points(&self) -> Vec<Q> {
        let mut v: Vec<Q> = self.break_pairs().into_iter().flat_map(|p| [p.a, p.b]).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn is_regular_on(&self, a: &Q, b: &Q) -> Result<bool> {
        if a > b {
            return Err(Error::Argument("is_regular_on needs a ≤ b".into()));
        }
        Ok(!self.break_pairs().iter().any(|p| a <= &p.a && &p.b <= b))
    }

    /// (min, max) of |slope| over branches whose source meets S ∩ K.
    pub fn slope_range(&self, s: &Region) -> Result<(Q, Q)> {
        let mut lo: Option<Q> = None;
        let mut hi: Option<Q> = None;
        for b in &self.branches {
            let piece = s.intersect(&Region::closed(b.lo().clone(), b.hi().clone()));
            if self.space.region_is_empty(&piece) {
                continue;
            }
            let m = b.slope.abs();
            if lo.as_ref().is_none_or(|l| &m < l) {
                lo = Some(m.clone());
            }
            if hi.as_ref().is_none_or(|h| &m > h) {
                hi = Some(m);
            }
        }
        match (lo, hi) {
            (Some(l), Some(h)) => Ok((l, h)),
            _ => Err(Error::Argument("slope_range of an empty set".into())),
        }
    }

    /// sup/inf of |f(x)−f(y)|/|x−y| over distinct x, y ∈ B ∩ K; None is the
    /// ∞ sentinel.
    pub fn distortion(&self, s: &Region) -> Result<Option<Q>> {
        let mut pieces = Vec::new();
        for b in &self.branches {
            let piece = s.intersect(&Region::closed(b.lo().clone(), b.hi().clone()));
            if let (Some(l), Some(h)) = (self.space.region_inf(&piece), self.space.region_sup(&piece)) {
                pieces.push((l, h, b));
            }
        }
        let mut quots: Vec<Q> = Vec::new();
        for (l, h, b) in &pieces {
            if l < h {
                quots.push(b.slope.abs());
            }
        }
        for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                let (li, hi, bi) = &pieces[i];
                let (lj, hj, bj) = &pieces[j];
                for x in [li, hi] {
                    for y in [lj, hj] {
                        if x < y {
                            quots.push(((bj.eval(y) - bi.eval(x)) / (y - x)).abs());
                        }
                    }
                }
            }
        }
        let (Some(mx), Some(mn)) = (quots.iter().max(), quots.iter().min()) else {
            return Err(Error::Argument("distortion needs at least two points".into()));
        };
        Ok((!mn.is_zero()).then(|| mx / mn))
    }
}

/// Minimal break-pair span over all generators; None when no generator
/// has a break pair.
pub fn regularity_radius(gens: &[PAHomeo]) -> Result<Option<Q>> {
    if gens.is_empty() {
        return Err(Error::Argument("regularity_radius of an empty list".into()));
    }
    Ok(gens.iter().flat_map(|g| g.break_pairs()).map(|p| p.b - p.a).min())
}

/// Joins consecutive branches carrying the same affine map whenever the
/// gap between them is sent to a gap.
fn normalize(space: &CompactSet, branches: Vec<Branch>) -> Vec<Branch> {
    let mut out: Vec<Branch> = Vec::with_capacity(branches.len());
    for b in branches {
        if let Some(last) = out.last_mut() {
            if last.same_affine(&b) {
                let joinable = last.hi() == b.lo() || {
                    let (p, q) = (last.eval(last.hi()), b.eval(b.lo()));
                    let (p, q) = if p < q { (p, q) } else { (q, p) };
                    !space.span_meets(&Span::open(p, q))
                };
                if joinable {
                    last.source.1 = b.source.1;
                    continue;
                }
            }
        }
        out.push(b);
    }
    out
}

fn validate(space: &CompactSet, branches: Vec<Branch>) -> Result<Vec<Branch>> {
    let mut bs = Vec::with_capacity(branches.len());
    for b in branches {
        if b.slope.is_zero() {
            return Err(Error::InvalidMap("zero slope".into()));
        }
        if b.lo() > b.hi() {
            return Err(Error::InvalidMap("branch source has lo > hi".into()));
        }
        let (Some(l), Some(h)) = (space.ceil_point(b.lo()), space.floor_point(b.hi())) else { continue };
        if l > h {
            continue;
        }
        bs.push(Branch::new(l, h, b.slope, b.offset));
    }
    if bs.is_empty() {
        return Err(Error::InvalidMap("no branch meets K".into()));
    }
    bs.sort();
    if bs[0].lo() != space.lo() || bs[bs.len() - 1].hi() != space.hi() {
        return Err(Error::InvalidMap("branch sources do not cover K".into()));
    }
    for w in bs.windows(2) {
        if w[1].lo() < w[0].hi() {
            return Err(Error::InvalidMap("overlapping branch sources".into()));
        }
        if w[1].lo() == w[0].hi() {
            if w[0].eval(w[0].hi()) != w[1].eval(w[1].lo()) {
                return Err(Error::InvalidMap("touching branches disagree".into()));
            }
        } else if space.span_meets(&Span::open(w[0].hi().clone(), w[1].lo().clone())) {
            return Err(Error::InvalidMap("branch sources do not cover K".into()));
        }
    }
    for b in &bs {
        check_branch_into(space, b)?;
    }
    let mut imgs: Vec<(Q, Q, usize)> = bs
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (p, q) = b.image();
            (p, q, i)
        })
        .collect();
    imgs.sort();
    if &imgs[0].0 != space.lo() || &imgs[imgs.len() - 1].1 != space.hi() {
        return Err(Error::InvalidMap("images do not cover K".into()));
    }
    for w in imgs.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::InvalidMap("branch images overlap".into()));
        }
        if w[1].0 == w[0].1 {
            // the shared value must come from one shared source point
            if bs[w[0].2].uneval(&w[0].1) != bs[w[1].2].uneval(&w[1].0) {
                return Err(Error::InvalidMap("branch images overlap".into()));
            }
        } else if space.span_meets(&Span::open(w[0].1.clone(), w[1].0.clone())) {
            return Err(Error::InvalidMap("images do not cover K".into()));
        }
    }
    Ok(bs)
}

/// Checks that the branch carries source ∩ K onto image ∩ K.
fn check_branch_into(space: &CompactSet, b: &Branch) -> Result<()> {
    let bad = |why: &str| Err(Error::InvalidMap(format!("branch on [{}, {}]: {why}", b.lo(), b.hi())));
    let pieces: Vec<(Q, Q)> = match space.ifs() {
        Some(f) => {
            let Some(cells) = space.decompose(b.lo(), b.hi(), MAX_CELL_DEPTH) else {
                return bad("source is not a finite union of cells");
            };
            if b.slope.is_negative() && !f.is_symmetric() {
                return bad("orientation reversal needs a symmetric IFS");
            }
            let mut out = Vec::with_capacity(cells.len());
            for c in cells {
                let iv = space.cell(&c);
                let (p, q) = (b.eval(&iv.lo), b.eval(&iv.hi));
                let (p, q) = if p < q { (p, q) } else { (q, p) };
                if space.address_of(&p, &q).is_none() {
                    return bad("a cell is not sent onto a cell");
                }
                out.push((iv.lo, iv.hi));
            }
            out
        }
        None => {
            let mut out = Vec::new();
            for iv in space.intervals() {
                if &iv.hi < b.lo() || &iv.lo > b.hi() {
                    continue;
                }
                let l = rational::max_q(&iv.lo, b.lo()).clone();
                let h = rational::min_q(&iv.hi, b.hi()).clone();
                let (p, q) = (b.eval(&l), b.eval(&h));
                let (p, q) = if p < q { (p, q) } else { (q, p) };
                let inside = space.intervals().iter().any(|c| c.lo <= p && q <= c.hi);
                if !inside {
                    return bad("image leaves K");
                }
                out.push((l, h));
            }
            out
        }
    };
    for w in pieces.windows(2) {
        if w[0].1 == w[1].0 {
            continue;
        }
        let (p, q) = (b.eval(&w[0].1), b.eval(&w[1].0));
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        if space.span_meets(&Span::open(p, q)) {
            return bad("an inner gap is not sent to a gap");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
