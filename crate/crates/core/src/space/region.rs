use serde::{Deserialize, Serialize};

use crate::rational::{self, Q};

/// A real interval with independent open/closed ends. Empty spans never
/// survive normalization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    #[serde(with = "rational::qstr")]
    pub lo: Q,
    #[serde(with = "rational::qstr")]
    pub hi: Q,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default)]
    pub hi_open: bool,
}

impl Span {
    pub fn closed(lo: Q, hi: Q) -> Self {
        Span { lo, hi, lo_open: false, hi_open: false }
    }

    pub fn open(lo: Q, hi: Q) -> Self {
        Span { lo, hi, lo_open: true, hi_open: true }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open))
    }

    pub fn contains(&self, x: &Q) -> bool {
        let above = if self.lo_open { x > &self.lo } else { x >= &self.lo };
        let below = if self.hi_open { x < &self.hi } else { x <= &self.hi };
        above && below
    }

    fn intersect(&self, o: &Span) -> Span {
        let (lo, lo_open) = match self.lo.cmp(&o.lo) {
            std::cmp::Ordering::Greater => (self.lo.clone(), self.lo_open),
            std::cmp::Ordering::Less => (o.lo.clone(), o.lo_open),
            std::cmp::Ordering::Equal => (self.lo.clone(), self.lo_open || o.lo_open),
        };
        let (hi, hi_open) = match self.hi.cmp(&o.hi) {
            std::cmp::Ordering::Less => (self.hi.clone(), self.hi_open),
            std::cmp::Ordering::Greater => (o.hi.clone(), o.hi_open),
            std::cmp::Ordering::Equal => (self.hi.clone(), self.hi_open || o.hi_open),
        };
        Span { lo, hi, lo_open, hi_open }
    }
}

/// A finite union of spans. As a subset of a compact set K it always means
/// its intersection with K; the K-relative queries live on `CompactSet`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region {
    spans: Vec<Span>,
}

impl Region {
    pub fn empty() -> Self {
        Region { spans: Vec::new() }
    }

    pub fn closed(lo: Q, hi: Q) -> Self {
        Self::from_spans(vec![Span::closed(lo, hi)])
    }

    pub fn from_spans(mut spans: Vec<Span>) -> Self {
        spans.retain(|s| !s.is_empty());
        spans.sort_by(|a, b| a.lo.cmp(&b.lo).then(a.lo_open.cmp(&b.lo_open)));
        let mut out: Vec<Span> = Vec::with_capacity(spans.len());
        for s in spans {
            if let Some(last) = out.last_mut() {
                let joins = s.lo < last.hi || (s.lo == last.hi && !(last.hi_open && s.lo_open));
                if joins {
                    match s.hi.cmp(&last.hi) {
                        std::cmp::Ordering::Greater => {
                            last.hi = s.hi;
                            last.hi_open = s.hi_open;
                        }
                        std::cmp::Ordering::Equal => last.hi_open &= s.hi_open,
                        std::cmp::Ordering::Less => {}
                    }
                    continue;
                }
            }
            out.push(s);
        }
        Region { spans: out }
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn is_void(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn contains(&self, x: &Q) -> bool {
        self.spans.iter().any(|s| s.contains(x))
    }

    pub fn union(&self, o: &Region) -> Region {
        Self::from_spans(self.spans.iter().chain(o.spans.iter()).cloned().collect())
    }

    pub fn intersect(&self, o: &Region) -> Region {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.spans.len() && j < o.spans.len() {
            let (a, b) = (&self.spans[i], &o.spans[j]);
            let s = a.intersect(b);
            if !s.is_empty() {
                out.push(s);
            }
            if a.hi < b.hi || (a.hi == b.hi && a.hi_open) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::from_spans(out)
    }

    /// Real-line complement of the region, restricted to the closed hull
    /// [lo, hi].
    pub fn complement_within(&self, lo: &Q, hi: &Q) -> Region {
        let mut out = Vec::new();
        let mut cur = lo.clone();
        let mut cur_open = false;
        for s in &self.spans {
            out.push(Span { lo: cur.clone(), hi: s.lo.clone(), lo_open: cur_open, hi_open: !s.lo_open });
            cur = s.hi.clone();
            cur_open = !s.hi_open;
        }
        out.push(Span { lo: cur, hi: hi.clone(), lo_open: cur_open, hi_open: false });
        Self::from_spans(out).intersect(&Region::closed(lo.clone(), hi.clone()))
    }

    pub fn difference(&self, o: &Region) -> Region {
        let (Some(first), Some(last)) = (self.spans.first(), self.spans.last()) else {
            return Region::empty();
        };
        self.intersect(&o.complement_within(&first.lo, &last.hi))
    }

    /// Image under x ↦ a·x + b.
    pub fn affine_image(&self, a: &Q, b: &Q) -> Region {
        let neg = *a < Q::from_integer(0.into());
        Self::from_spans(
            self.spans
                .iter()
                .map(|s| {
                    let (l, h) = (a * &s.lo + b, a * &s.hi + b);
                    if neg {
                        Span { lo: h, hi: l, lo_open: s.hi_open, hi_open: s.lo_open }
                    } else {
                        Span { lo: l, hi: h, lo_open: s.lo_open, hi_open: s.hi_open }
                    }
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn normalization_merges_touching_closed_ends() {
        let r = Region::from_spans(vec![Span::closed(qi(0), q(1, 2)), Span::open(q(1, 2), qi(1))]);
        assert_eq!(r.spans().len(), 1);
        let r = Region::from_spans(vec![Span::open(qi(0), q(1, 2)), Span::open(q(1, 2), qi(1))]);
        assert_eq!(r.spans().len(), 2);
        assert!(!r.contains(&q(1, 2)));
    }

    #[test]
    fn set_algebra() {
        let a = Region::closed(qi(0), qi(1));
        let b = Region::from_spans(vec![Span::open(q(1, 3), q(2, 3))]);
        let d = a.difference(&b);
        assert!(d.contains(&q(1, 3)) && d.contains(&q(2, 3)) && !d.contains(&q(1, 2)));
        assert_eq!(d.intersect(&b), Region::empty());
        assert_eq!(d.union(&b), a);
        let img = b.affine_image(&qi(-1), &qi(1));
        assert_eq!(img, b);
    }
}
