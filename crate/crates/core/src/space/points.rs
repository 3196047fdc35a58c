use num_traits::Signed;
use serde::{Deserialize, Serialize};

use super::{CompactSet, Interval};
use crate::error::{Error, Result};
use crate::rational::{self, Q};

/// Finite sorted duplicate-free subset of K.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointSet {
    #[serde(with = "rational::qvec")]
    points: Vec<Q>,
}

impl PointSet {
    pub fn new(mut points: Vec<Q>, k: &CompactSet) -> Result<Self> {
        points.sort();
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("duplicate points".into()));
        }
        if let Some(p) = points.iter().find(|p| !k.contains(p)) {
            return Err(Error::NotInSpace(p.to_string()));
        }
        Ok(PointSet { points })
    }

    /// Sorts and deduplicates without a membership check; callers guarantee
    /// the points lie in K.
    pub fn from_members(mut points: Vec<Q>) -> Self {
        points.sort();
        points.dedup();
        PointSet { points }
    }

    pub fn points(&self) -> &[Q] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: &Q) -> bool {
        self.points.binary_search(x).is_ok()
    }

    pub fn intersects(&self, o: &PointSet) -> bool {
        self.points.iter().any(|p| o.contains(p))
    }

    pub fn union(&self, o: &PointSet) -> PointSet {
        Self::from_members(self.points.iter().chain(o.points.iter()).cloned().collect())
    }
}

/// Minimal pairwise distance.
pub fn delta_m(points: &[Q]) -> Result<Q> {
    if points.len() < 2 {
        return Err(Error::Argument("delta_m needs at least two points".into()));
    }
    let mut v = points.to_vec();
    v.sort();
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Argument("duplicate points".into()));
    }
    Ok(v.windows(2).map(|w| &w[1] - &w[0]).min().expect("two points"))
}

fn dist_to(ivs: &[Interval], x: &Q) -> Q {
    let idx = ivs.partition_point(|iv| &iv.hi < x);
    let mut best: Option<Q> = None;
    if idx < ivs.len() {
        best = Some(if &ivs[idx].lo <= x { Q::from_integer(0.into()) } else { &ivs[idx].lo - x });
    }
    if idx > 0 {
        let d = x - &ivs[idx - 1].hi;
        best = Some(match best {
            Some(b) if b <= d => b,
            _ => d,
        });
    }
    best.expect("nonempty")
}

fn directed(a: &[Interval], b: &[Interval]) -> Q {
    // d(·, B) restricted to an interval peaks at an endpoint or at the
    // midpoint of one of B's gaps.
    let mut cands: Vec<Q> = a.iter().flat_map(|iv| [iv.lo.clone(), iv.hi.clone()]).collect();
    let two = Q::from_integer(2.into());
    for w in b.windows(2) {
        let mid = (&w[0].hi + &w[1].lo) / &two;
        if a.iter().any(|iv| iv.contains(&mid)) {
            cands.push(mid);
        }
    }
    cands.iter().map(|x| dist_to(b, x).abs()).max().expect("nonempty")
}

/// Hausdorff distance between two interval unions (the stored interval
/// lists, i.e. depth approximations for IFS sets).
pub fn hausdorff_distance(a: &CompactSet, b: &CompactSet) -> Q {
    let (x, y) = (directed(a.intervals(), b.intervals()), directed(b.intervals(), a.intervals()));
    if x >= y { x } else { y }
}
