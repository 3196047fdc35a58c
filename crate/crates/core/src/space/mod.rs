//! Compact subsets of the line: explicit finite unions of closed rational
//! intervals, or self-similar Cantor sets given by an increasing affine IFS.
//!
//! For an IFS set the semantic K is the attractor itself; `intervals()` is
//! only its depth-d approximation. Membership, nearest points and gap
//! neighbours are answered exactly on the attractor.

mod points;
mod region;
mod spec;

pub use points::{delta_m, hausdorff_distance, PointSet};
pub use region::{Region, Span};
pub use spec::SpaceSpec;

use std::collections::HashSet;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, q, Q};

/// Membership and neighbour searches on IFS sets give up after this many
/// expansion steps. Reaching it only happens for IFS whose inverse branches
/// make denominators grow; the point is then within ratio^LIMIT of K and is
/// treated as a member.
const EXPANSION_LIMIT: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub lo: Q,
    pub hi: Q,
}

impl Interval {
    pub fn new(lo: Q, hi: Q) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> Q {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Q) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

/// Increasing affine IFS x ↦ r_i·x + o_i, pieces sorted left to right.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ifs {
    pub ratios: Vec<Q>,
    pub offsets: Vec<Q>,
    pub alphabet: Vec<char>,
    pub depth: u32,
    hull: Interval,
    pieces: Vec<Interval>,
}

impl Ifs {
    pub fn arity(&self) -> usize {
        self.ratios.len()
    }

    pub fn hull(&self) -> &Interval {
        &self.hull
    }

    pub fn pieces(&self) -> &[Interval] {
        &self.pieces
    }

    fn unapply(&self, i: usize, x: &Q) -> Q {
        (x - &self.offsets[i]) / &self.ratios[i]
    }

    fn piece_of(&self, x: &Q) -> Option<usize> {
        self.pieces.iter().position(|p| p.contains(x))
    }

    /// Cell for an address (piece indices, outermost first).
    pub fn cell(&self, address: &[usize]) -> Interval {
        let (mut a, mut b) = (Q::one(), Q::zero());
        for &i in address {
            b = &a * &self.offsets[i] + &b;
            a = &a * &self.ratios[i];
        }
        Interval::new(&a * &self.hull.lo + &b, &a * &self.hull.hi + &b)
    }

    /// True when x ↦ lo+hi−x maps the attractor onto itself.
    pub fn is_symmetric(&self) -> bool {
        let m = self.arity();
        let s = &self.hull.lo + &self.hull.hi;
        (0..m).all(|i| {
            let p = &self.pieces[i];
            let r = &self.pieces[m - 1 - i];
            &s - &p.hi == r.lo && &s - &p.lo == r.hi
        })
    }

    fn default_alphabet(ratios: &[Q], offsets: &[Q], hull: &Interval) -> Vec<char> {
        // base-k digits when the IFS is a digit system on [0,1] with ratio 1/k
        let r = &ratios[0];
        let unit = hull.lo.is_zero() && hull.hi.is_one();
        if unit && ratios.iter().all(|x| x == r) && r.numer().is_one() {
            let k = r.denom().clone();
            let digits: Option<Vec<char>> = offsets
                .iter()
                .map(|o| {
                    let d = o * Q::from_integer(k.clone());
                    if d.is_integer() {
                        let v: u32 = d.to_integer().try_into().ok()?;
                        char::from_digit(v, 36)
                    } else {
                        None
                    }
                })
                .collect();
            if let Some(d) = digits {
                return d;
            }
        }
        (0..ratios.len()).map(|i| char::from_digit(i as u32, 36).unwrap_or('?')).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Neighbor {
    /// Points of K accumulate at x from this side.
    Accumulates,
    /// Across a bounded gap, the nearest point of K on this side.
    Next(Q),
    /// x is an extreme point of K.
    End,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Gap {
    LeftUnbounded {
        #[serde(with = "rational::qstr")]
        right: Q,
    },
    Bounded {
        #[serde(with = "rational::qstr")]
        left: Q,
        #[serde(with = "rational::qstr")]
        right: Q,
    },
    RightUnbounded {
        #[serde(with = "rational::qstr")]
        left: Q,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompactSet {
    intervals: Vec<Interval>,
    ifs: Option<Ifs>,
}

impl CompactSet {
    /// Normalizes a list of closed intervals: sorts, merges overlapping or
    /// touching ones.
    pub fn make(pairs: Vec<(Q, Q)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidSet("empty interval list".into()));
        }
        let mut ivs = Vec::with_capacity(pairs.len());
        for (l, r) in pairs {
            if l > r {
                return Err(Error::InvalidSet(format!("interval [{l}, {r}] has l > r")));
            }
            ivs.push(Interval::new(l, r));
        }
        ivs.sort();
        let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            match out.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => out.push(iv),
            }
        }
        Ok(CompactSet { intervals: out, ifs: None })
    }

    /// Attractor of an increasing affine IFS, carried at approximation depth.
    pub fn from_ifs(ratios: Vec<Q>, offsets: Vec<Q>, depth: u32, alphabet: Option<Vec<char>>) -> Result<Self> {
        let m = ratios.len();
        if m < 2 || offsets.len() != m {
            return Err(Error::InvalidSet("IFS needs at least two maps with matching offsets".into()));
        }
        if ratios.iter().any(|r| *r <= Q::zero() || *r >= Q::one()) {
            return Err(Error::InvalidSet("IFS ratios must lie in (0,1)".into()));
        }
        let lo = &offsets[0] / (Q::one() - &ratios[0]);
        let hi = &offsets[m - 1] / (Q::one() - &ratios[m - 1]);
        if lo >= hi {
            return Err(Error::InvalidSet("IFS hull is degenerate".into()));
        }
        let hull = Interval::new(lo.clone(), hi.clone());
        let pieces: Vec<Interval> = (0..m)
            .map(|i| Interval::new(&ratios[i] * &lo + &offsets[i], &ratios[i] * &hi + &offsets[i]))
            .collect();
        for w in pieces.windows(2) {
            if w[0].hi >= w[1].lo {
                return Err(Error::InvalidSet("IFS pieces must be sorted and separated by gaps".into()));
            }
        }
        if pieces[0].lo != lo || pieces[m - 1].hi != hi {
            return Err(Error::InvalidSet("IFS pieces do not span the hull".into()));
        }
        let alphabet = match alphabet {
            Some(a) => {
                let uniq: HashSet<char> = a.iter().copied().collect();
                if a.len() != m || uniq.len() != m {
                    return Err(Error::InvalidSet("alphabet must have one distinct symbol per map".into()));
                }
                a
            }
            None => Ifs::default_alphabet(&ratios, &offsets, &hull),
        };
        let ifs = Ifs { ratios, offsets, alphabet, depth, hull, pieces };
        let mut intervals = vec![ifs.hull.clone()];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(intervals.len() * m);
            for iv in &intervals {
                let len = iv.len();
                for p in &ifs.pieces {
                    let a = &iv.lo + (&p.lo - &lo) * &len / (&hi - &lo);
                    let b = &iv.lo + (&p.hi - &lo) * &len / (&hi - &lo);
                    next.push(Interval::new(a, b));
                }
            }
            intervals = next;
        }
        Ok(CompactSet { intervals, ifs: Some(ifs) })
    }

    pub fn ternary_cantor(depth: u32) -> Self {
        Self::from_ifs(vec![q(1, 3), q(1, 3)], vec![q(0, 1), q(2, 3)], depth, None)
            .expect("ternary IFS is valid")
    }

    /// The same attractor carried at another approximation depth.
    pub fn with_depth(&self, depth: u32) -> Self {
        match &self.ifs {
            Some(f) => Self::from_ifs(f.ratios.clone(), f.offsets.clone(), depth, Some(f.alphabet.clone()))
                .expect("already validated"),
            None => self.clone(),
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn ifs(&self) -> Option<&Ifs> {
        self.ifs.as_ref()
    }

    pub fn depth(&self) -> Option<u32> {
        self.ifs.as_ref().map(|f| f.depth)
    }

    pub fn lo(&self) -> &Q {
        &self.intervals[0].lo
    }

    pub fn hi(&self) -> &Q {
        &self.intervals[self.intervals.len() - 1].hi
    }

    pub fn diam(&self) -> Q {
        self.hi() - self.lo()
    }

    /// Same underlying set (approximation depth ignored).
    pub fn same_set(&self, other: &CompactSet) -> bool {
        match (&self.ifs, &other.ifs) {
            (Some(a), Some(b)) => a.ratios == b.ratios && a.offsets == b.offsets,
            (None, None) => self.intervals == other.intervals,
            _ => false,
        }
    }

    pub fn whole(&self) -> Region {
        Region::closed(self.lo().clone(), self.hi().clone())
    }

    // ---- exact point queries ----------------------------------------------

    pub fn contains(&self, x: &Q) -> bool {
        match &self.ifs {
            None => self.component_of(x).is_some(),
            Some(f) => {
                let mut cur = x.clone();
                let mut seen = HashSet::new();
                for _ in 0..EXPANSION_LIMIT {
                    let Some(i) = f.piece_of(&cur) else { return false };
                    cur = f.unapply(i, &cur);
                    if !seen.insert(cur.clone()) {
                        return true;
                    }
                }
                true
            }
        }
    }

    fn component_of(&self, x: &Q) -> Option<usize> {
        let idx = self.intervals.partition_point(|iv| &iv.hi < x);
        (idx < self.intervals.len() && self.intervals[idx].lo <= *x).then_some(idx)
    }

    /// Least point of K that is ≥ x.
    pub fn ceil_point(&self, x: &Q) -> Option<Q> {
        if x <= self.lo() {
            return Some(self.lo().clone());
        }
        if x > self.hi() {
            return None;
        }
        match &self.ifs {
            None => {
                let idx = self.intervals.partition_point(|iv| &iv.hi < x);
                let iv = &self.intervals[idx];
                Some(if &iv.lo > x { iv.lo.clone() } else { x.clone() })
            }
            Some(f) => {
                let (mut a, mut b) = (Q::one(), Q::zero());
                let mut cur = x.clone();
                let mut seen = HashSet::new();
                for _ in 0..EXPANSION_LIMIT {
                    match f.piece_of(&cur) {
                        Some(i) => {
                            b = &a * &f.offsets[i] + &b;
                            a = &a * &f.ratios[i];
                            cur = f.unapply(i, &cur);
                            if !seen.insert(cur.clone()) {
                                return Some(x.clone());
                            }
                        }
                        None => {
                            let j = f.pieces.iter().position(|p| p.lo > cur).expect("inside hull");
                            return Some(&a * &f.pieces[j].lo + &b);
                        }
                    }
                }
                Some(x.clone())
            }
        }
    }

    /// Greatest point of K that is ≤ x.
    pub fn floor_point(&self, x: &Q) -> Option<Q> {
        if x >= self.hi() {
            return Some(self.hi().clone());
        }
        if x < self.lo() {
            return None;
        }
        match &self.ifs {
            None => {
                let idx = self.intervals.partition_point(|iv| &iv.lo <= x);
                let iv = &self.intervals[idx - 1];
                Some(if &iv.hi < x { iv.hi.clone() } else { x.clone() })
            }
            Some(f) => {
                let (mut a, mut b) = (Q::one(), Q::zero());
                let mut cur = x.clone();
                let mut seen = HashSet::new();
                for _ in 0..EXPANSION_LIMIT {
                    match f.piece_of(&cur) {
                        Some(i) => {
                            b = &a * &f.offsets[i] + &b;
                            a = &a * &f.ratios[i];
                            cur = f.unapply(i, &cur);
                            if !seen.insert(cur.clone()) {
                                return Some(x.clone());
                            }
                        }
                        None => {
                            let j = f.pieces.iter().rposition(|p| p.hi < cur).expect("inside hull");
                            return Some(&a * &f.pieces[j].hi + &b);
                        }
                    }
                }
                Some(x.clone())
            }
        }
    }

    /// Structure of K immediately right of x ∈ K.
    pub fn right_neighbor(&self, x: &Q) -> Neighbor {
        if x >= self.hi() {
            return Neighbor::End;
        }
        match &self.ifs {
            None => {
                let idx = self.component_of(x).expect("x in K");
                let iv = &self.intervals[idx];
                if x < &iv.hi {
                    Neighbor::Accumulates
                } else {
                    Neighbor::Next(self.intervals[idx + 1].lo.clone())
                }
            }
            Some(f) => {
                let (mut a, mut b) = (Q::one(), Q::zero());
                let mut cur = x.clone();
                let mut seen = HashSet::new();
                for _ in 0..EXPANSION_LIMIT {
                    let i = f.piece_of(&cur).expect("x in K");
                    if cur == f.pieces[i].hi && i + 1 < f.arity() {
                        return Neighbor::Next(&a * &f.pieces[i + 1].lo + &b);
                    }
                    b = &a * &f.offsets[i] + &b;
                    a = &a * &f.ratios[i];
                    cur = f.unapply(i, &cur);
                    if !seen.insert(cur.clone()) {
                        break;
                    }
                }
                Neighbor::Accumulates
            }
        }
    }

    /// Structure of K immediately left of x ∈ K.
    pub fn left_neighbor(&self, x: &Q) -> Neighbor {
        if x <= self.lo() {
            return Neighbor::End;
        }
        match &self.ifs {
            None => {
                let idx = self.component_of(x).expect("x in K");
                let iv = &self.intervals[idx];
                if x > &iv.lo {
                    Neighbor::Accumulates
                } else {
                    Neighbor::Next(self.intervals[idx - 1].hi.clone())
                }
            }
            Some(f) => {
                let (mut a, mut b) = (Q::one(), Q::zero());
                let mut cur = x.clone();
                let mut seen = HashSet::new();
                for _ in 0..EXPANSION_LIMIT {
                    let i = f.piece_of(&cur).expect("x in K");
                    if cur == f.pieces[i].lo && i > 0 {
                        return Neighbor::Next(&a * &f.pieces[i - 1].hi + &b);
                    }
                    b = &a * &f.offsets[i] + &b;
                    a = &a * &f.ratios[i];
                    cur = f.unapply(i, &cur);
                    if !seen.insert(cur.clone()) {
                        break;
                    }
                }
                Neighbor::Accumulates
            }
        }
    }

    /// True iff a < b are the two extremities of a bounded gap of K.
    pub fn is_gap(&self, a: &Q, b: &Q) -> bool {
        a < b && self.contains(a) && self.contains(b) && self.right_neighbor(a) == Neighbor::Next(b.clone())
    }

    /// Components of ℝ∖K for the stored interval list.
    pub fn gaps(&self) -> Vec<Gap> {
        let mut out = vec![Gap::LeftUnbounded { right: self.lo().clone() }];
        for w in self.intervals.windows(2) {
            out.push(Gap::Bounded { left: w[0].hi.clone(), right: w[1].lo.clone() });
        }
        out.push(Gap::RightUnbounded { left: self.hi().clone() });
        out
    }

    /// Bounded gaps of the true set that separate two cells of the given
    /// depth (for an explicit set: all bounded gaps).
    pub fn bounded_gaps_to_depth(&self, depth: u32) -> Vec<(Q, Q)> {
        self.cells(depth).windows(2).map(|w| (w[0].hi.clone(), w[1].lo.clone())).collect()
    }

    // ---- cells ----------------------------------------------------------------

    /// Number of cells at a depth: arity^depth for IFS sets, the component
    /// count for explicit sets.
    pub fn cell_count(&self, depth: u32) -> usize {
        match &self.ifs {
            Some(f) => f.arity().pow(depth),
            None => self.intervals.len(),
        }
    }

    pub fn cells(&self, depth: u32) -> Vec<Interval> {
        match &self.ifs {
            None => self.intervals.clone(),
            Some(f) => (0..self.cell_count(depth)).map(|i| f.cell(&self.index_address(i, depth))).collect(),
        }
    }

    pub fn index_address(&self, mut index: usize, depth: u32) -> Vec<usize> {
        match &self.ifs {
            None => vec![index],
            Some(f) => {
                let m = f.arity();
                let mut a = vec![0; depth as usize];
                for slot in a.iter_mut().rev() {
                    *slot = index % m;
                    index /= m;
                }
                a
            }
        }
    }

    pub fn cell(&self, address: &[usize]) -> Interval {
        match &self.ifs {
            None => self.intervals[address[0]].clone(),
            Some(f) => f.cell(address),
        }
    }

    /// Cell indices at `depth` covered by the cell with this address.
    pub fn cell_range(&self, address: &[usize], depth: u32) -> Option<std::ops::Range<usize>> {
        match &self.ifs {
            None => (address.len() == 1).then(|| address[0]..address[0] + 1),
            Some(f) => {
                if address.len() > depth as usize {
                    return None;
                }
                let m = f.arity();
                let idx = address.iter().fold(0usize, |acc, &d| acc * m + d);
                let span = m.pow(depth - address.len() as u32);
                Some(idx * span..(idx + 1) * span)
            }
        }
    }

    pub fn address_string(&self, address: &[usize]) -> String {
        match &self.ifs {
            None => address.iter().map(|i| format!("#{i}")).collect(),
            Some(f) => address.iter().map(|&i| f.alphabet[i]).collect(),
        }
    }

    pub fn parse_address(&self, word: &str) -> Result<Vec<usize>> {
        let f = self.ifs.as_ref().ok_or_else(|| Error::InvalidSet("addresses need an IFS structure".into()))?;
        word.chars()
            .map(|c| {
                f.alphabet
                    .iter()
                    .position(|&a| a == c)
                    .ok_or_else(|| Error::Parse(format!("symbol {c:?} not in alphabet")))
            })
            .collect()
    }

    /// Address of the cell equal to [lo, hi], if any.
    pub fn address_of(&self, lo: &Q, hi: &Q) -> Option<Vec<usize>> {
        match &self.ifs {
            None => self.intervals.iter().position(|iv| &iv.lo == lo && &iv.hi == hi).map(|i| vec![i]),
            Some(f) => {
                let mut addr = Vec::new();
                let (mut l, mut h) = (lo.clone(), hi.clone());
                loop {
                    if l == f.hull.lo && h == f.hull.hi {
                        return Some(addr);
                    }
                    let i = f.pieces.iter().position(|p| p.contains(&l) && p.contains(&h))?;
                    if f.pieces[i].len() < &h - &l {
                        return None;
                    }
                    addr.push(i);
                    l = f.unapply(i, &l);
                    h = f.unapply(i, &h);
                    if addr.len() > 4096 {
                        return None;
                    }
                }
            }
        }
    }

    /// Writes K ∩ [lo, hi] as a disjoint union of maximal cells, provided
    /// every cell needed has depth ≤ max_depth. For explicit sets the range
    /// must be a union of whole components.
    pub fn decompose(&self, lo: &Q, hi: &Q, max_depth: usize) -> Option<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        match &self.ifs {
            None => {
                for (i, iv) in self.intervals.iter().enumerate() {
                    if iv.hi < *lo || iv.lo > *hi {
                        continue;
                    }
                    if iv.lo < *lo || iv.hi > *hi {
                        return None;
                    }
                    out.push(vec![i]);
                }
            }
            Some(f) => {
                let mut stack = vec![Vec::<usize>::new()];
                while let Some(addr) = stack.pop() {
                    let c = f.cell(&addr);
                    if c.hi < *lo || c.lo > *hi {
                        continue;
                    }
                    if *lo <= c.lo && c.hi <= *hi {
                        out.push(addr);
                        continue;
                    }
                    if addr.len() >= max_depth {
                        return None;
                    }
                    for i in (0..f.arity()).rev() {
                        let mut a = addr.clone();
                        a.push(i);
                        stack.push(a);
                    }
                }
            }
        }
        Some(out)
    }

    // ---- regions (subsets of K described by real intervals) ----------------

    /// Infimum of K ∩ span, or None if the intersection is empty.
    pub fn span_inf(&self, s: &Span) -> Option<Q> {
        let c = self.ceil_point(&s.lo)?;
        let cand = if c == s.lo && s.lo_open {
            match self.right_neighbor(&c) {
                Neighbor::Accumulates => return (s.lo < s.hi).then(|| s.lo.clone()),
                Neighbor::Next(n) => n,
                Neighbor::End => return None,
            }
        } else {
            c
        };
        (cand < s.hi || (cand == s.hi && !s.hi_open)).then_some(cand)
    }

    /// Supremum of K ∩ span, or None if the intersection is empty.
    pub fn span_sup(&self, s: &Span) -> Option<Q> {
        let c = self.floor_point(&s.hi)?;
        let cand = if c == s.hi && s.hi_open {
            match self.left_neighbor(&c) {
                Neighbor::Accumulates => return (s.lo < s.hi).then(|| s.hi.clone()),
                Neighbor::Next(n) => n,
                Neighbor::End => return None,
            }
        } else {
            c
        };
        (cand > s.lo || (cand == s.lo && !s.lo_open)).then_some(cand)
    }

    pub fn span_meets(&self, s: &Span) -> bool {
        self.span_inf(s).is_some()
    }

    /// Some point of K inside the span (an endpoint of K's structure).
    pub fn span_point(&self, s: &Span) -> Option<Q> {
        let inf = self.span_inf(s)?;
        if self.contains(&inf) && !(inf == s.lo && s.lo_open) {
            return Some(inf);
        }
        // inf not attained: points accumulate from the right of s.lo
        let sup = self.span_sup(s)?;
        if self.contains(&sup) && !(sup == s.hi && s.hi_open) {
            return Some(sup);
        }
        // both ends unattained; probe the midpoint
        let mid = (&s.lo + &s.hi) / crate::rational::qi(2);
        let c = self.ceil_point(&mid)?;
        if c < s.hi {
            return Some(c);
        }
        self.floor_point(&mid).filter(|f| f > &s.lo)
    }

    pub fn region_is_empty(&self, r: &Region) -> bool {
        !r.spans().iter().any(|s| self.span_meets(s))
    }

    /// K ∩ a ⊆ K ∩ b.
    pub fn region_subset(&self, a: &Region, b: &Region) -> bool {
        self.region_is_empty(&a.difference(b))
    }

    pub fn region_eq(&self, a: &Region, b: &Region) -> bool {
        self.region_subset(a, b) && self.region_subset(b, a)
    }

    pub fn region_disjoint(&self, a: &Region, b: &Region) -> bool {
        self.region_is_empty(&a.intersect(b))
    }

    pub fn region_inf(&self, r: &Region) -> Option<Q> {
        r.spans().iter().find_map(|s| self.span_inf(s))
    }

    pub fn region_sup(&self, r: &Region) -> Option<Q> {
        r.spans().iter().rev().find_map(|s| self.span_sup(s))
    }

    /// Diameter of K ∩ r (0 for empty or single-point sets).
    pub fn region_diam(&self, r: &Region) -> Q {
        match (self.region_inf(r), self.region_sup(r)) {
            (Some(a), Some(b)) => b - a,
            _ => Q::zero(),
        }
    }

    /// K ∖ r.
    pub fn complement(&self, r: &Region) -> Region {
        self.whole().difference(r)
    }

    /// {x ∈ K : d(x, A) < eps}.
    pub fn epsilon_neighborhood(&self, a: &PointSet, eps: &Q) -> Result<Region> {
        if *eps <= Q::zero() {
            return Err(Error::Argument("epsilon must be positive".into()));
        }
        Ok(Region::from_spans(
            a.points().iter().map(|p| Span::open(p - eps, p + eps)).collect(),
        ))
    }
}
