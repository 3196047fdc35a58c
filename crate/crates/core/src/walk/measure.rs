use num_traits::{Signed, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PAHomeo;
use crate::rational::{self, Q};
use crate::space::{CompactSet, Region};

use super::model::{derive_seed, WalkModel};

/// Fine cell indices whose union is K ∩ g(c), for every cell c at the
/// coarse depth; None when some image is not a union of cells of depth
/// ≤ fine.
pub fn cell_images(k: &CompactSet, g: &PAHomeo, coarse: u32, fine: u32) -> Option<Vec<Vec<usize>>> {
    k.cells(coarse)
        .iter()
        .map(|c| {
            let img = g.image(&Region::closed(c.lo.clone(), c.hi.clone()));
            let mut idx = Vec::new();
            for (lo, hi) in convex_pieces(k, &img) {
                for addr in k.decompose(&lo, &hi, fine as usize)? {
                    idx.extend(k.cell_range(&addr, fine)?);
                }
            }
            idx.sort_unstable();
            idx.dedup();
            Some(idx)
        })
        .collect()
}

/// K ∩ r as a sorted list of maximal K-convex pieces [lo, hi]∩K.
pub fn convex_pieces(k: &CompactSet, r: &Region) -> Vec<(Q, Q)> {
    let mut out: Vec<(Q, Q)> = Vec::new();
    for s in r.spans() {
        let (Some(lo), Some(hi)) = (k.span_inf(s), k.span_sup(s)) else {
            continue;
        };
        match out.last_mut() {
            Some(last) if last.1 == lo || k.is_gap(&last.1, &lo) => last.1 = hi,
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Largest coarse depth d ≤ fine at which every map sends every depth-d
/// cell onto a union of depth-≤fine cells, together with those transfers.
pub fn compatible_depth(k: &CompactSet, maps: &[PAHomeo], fine: u32) -> (u32, Vec<Vec<Vec<usize>>>) {
    for d in (0..=fine).rev() {
        let t: Option<Vec<_>> = maps.iter().map(|g| cell_images(k, g, d, fine)).collect();
        if let Some(t) = t {
            return (d, t);
        }
    }
    unreachable!("depth 0 is always compatible")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum Masses {
    #[serde(with = "rational::qvec")]
    Exact(Vec<Q>),
    Float(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMeasure {
    pub depth: u32,
    pub masses: Masses,
}

impl CellMeasure {
    pub fn exact(depth: u32, masses: Vec<Q>) -> Self {
        CellMeasure { depth, masses: Masses::Exact(masses) }
    }

    pub fn float(depth: u32, masses: Vec<f64>) -> Self {
        CellMeasure { depth, masses: Masses::Float(masses) }
    }

    pub fn len(&self) -> usize {
        match &self.masses {
            Masses::Exact(v) => v.len(),
            Masses::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.masses, Masses::Exact(_))
    }

    pub fn as_f64(&self) -> Vec<f64> {
        match &self.masses {
            Masses::Exact(v) => v.iter().map(rational::to_f64).collect(),
            Masses::Float(v) => v.clone(),
        }
    }

    pub fn total(&self) -> f64 {
        self.as_f64().iter().sum()
    }

    /// Masses of the cells at a coarser depth.
    pub fn marginal(&self, k: &CompactSet, depth: u32) -> Result<CellMeasure> {
        if depth > self.depth {
            return Err(Error::Depth(format!("cannot refine a depth-{} measure to depth {depth}", self.depth)));
        }
        let groups: Vec<std::ops::Range<usize>> = (0..k.cell_count(depth))
            .map(|i| k.cell_range(&k.index_address(i, depth), self.depth).expect("coarser cell"))
            .collect();
        Ok(match &self.masses {
            Masses::Exact(v) => CellMeasure::exact(depth, groups.into_iter().map(|r| v[r].iter().sum()).collect()),
            Masses::Float(v) => CellMeasure::float(depth, groups.into_iter().map(|r| v[r].iter().sum()).collect()),
        })
    }

    fn check(&self, k: &CompactSet) -> Result<()> {
        if self.len() != k.cell_count(self.depth) {
            return Err(Error::Depth(format!(
                "{} masses for {} cells at depth {}",
                self.len(),
                k.cell_count(self.depth),
                self.depth
            )));
        }
        Ok(())
    }
}

struct FloatMap {
    lo: Vec<f64>,
    slope: Vec<f64>,
    offset: Vec<f64>,
}

impl FloatMap {
    fn new(g: &PAHomeo) -> Self {
        let b = g.branches();
        FloatMap {
            lo: b.iter().map(|x| rational::to_f64(x.lo())).collect(),
            slope: b.iter().map(|x| rational::to_f64(&x.slope)).collect(),
            offset: b.iter().map(|x| rational::to_f64(&x.offset)).collect(),
        }
    }

    fn apply(&self, x: f64) -> f64 {
        let i = self.lo.partition_point(|&l| l <= x).max(1) - 1;
        self.slope[i] * x + self.offset[i]
    }
}

/// Birkhoff cell-occupation frequencies of x_{k+1} = f_{ω_k}(x_k), pooled
/// over restarts; restart r starts at the r-th cell endpoint and runs
/// n_steps steps. Points are tracked in floating point.
pub fn estimate_stationary_measure(model: &WalkModel, n_steps: usize, depth: u32, restarts: usize) -> Result<CellMeasure> {
    if n_steps == 0 || restarts == 0 {
        return Err(Error::Argument("n_steps and restarts must be positive".into()));
    }
    let k = model.space();
    let cells = k.cells(depth);
    let cell_lo: Vec<f64> = cells.iter().map(|c| rational::to_f64(&c.lo)).collect();
    let starts: Vec<f64> = cells.iter().flat_map(|c| [rational::to_f64(&c.lo), rational::to_f64(&c.hi)]).collect();
    let maps: Vec<FloatMap> = model.gens().iter().map(FloatMap::new).collect();
    let counts: Vec<Vec<u64>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(model.seed(), r as u64));
            let mut x = starts[r % starts.len()];
            let mut c = vec![0u64; cells.len()];
            for _ in 0..n_steps {
                c[cell_lo.partition_point(|&l| l <= x).max(1) - 1] += 1;
                x = maps[model.pick(rng.next_u64())].apply(x);
            }
            c
        })
        .collect();
    let total = (n_steps * restarts) as f64;
    let masses = (0..cells.len()).map(|i| counts.iter().map(|c| c[i]).sum::<u64>() as f64 / total).collect();
    Ok(CellMeasure::float(depth, masses))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// Depth of the cells c at which the equation is tested.
    pub coarse_depth: u32,
    /// max_c |μ(c) − Σ_s P(s) μ(s⁻¹c)|.
    pub max: f64,
    /// max_c |μ(c) − μ(g⁻¹c)| per generator.
    pub per_generator: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_q")]
    pub exact_max: Option<Q>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_qvec")]
    pub exact_per_generator: Option<Vec<Q>>,
}

mod opt_q {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Q>, s: S) -> std::result::Result<S::Ok, S::Error> {
        x.as_ref().map(rational::fmt_q).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Q>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| rational::parse_q(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

mod opt_qvec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Vec<Q>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        x.as_ref().map(|v| v.iter().map(rational::fmt_q).collect::<Vec<_>>()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Q>>, D::Error> {
        Option::<Vec<String>>::deserialize(d)?
            .map(|v| v.iter().map(|s| rational::parse_q(s).map_err(serde::de::Error::custom)).collect())
            .transpose()
    }
}

fn residuals<T>(coarse: &[T], fine: &[T], pre: &[Vec<Vec<usize>>], probs: &[T]) -> (T, Vec<T>)
where
    T: Clone + Zero + Signed + PartialOrd + for<'a> std::iter::Sum<&'a T>,
{
    let pre_mass: Vec<Vec<T>> = pre.iter().map(|t| t.iter().map(|ix| ix.iter().map(|&i| &fine[i]).sum()).collect()).collect();
    let max = |it: &mut dyn Iterator<Item = T>| it.fold(T::zero(), |m, x| if x > m { x } else { m });
    let per: Vec<T> = pre_mass
        .iter()
        .map(|pm| max(&mut coarse.iter().zip(pm).map(|(a, b)| (a.clone() - b.clone()).abs())))
        .collect();
    let avg = max(&mut (0..coarse.len()).map(|c| {
        let mix = pre_mass.iter().zip(probs).fold(T::zero(), |s, (pm, p)| s + p.clone() * pm[c].clone());
        (coarse[c].clone() - mix).abs()
    }));
    (avg, per)
}

/// Stationarity and per-generator invariance defects of μ. The equations
/// are tested on the deepest cells whose preimages are unions of cells of
/// μ's depth.
pub fn invariance_residual(mu: &CellMeasure, model: &WalkModel) -> Result<Residual> {
    let k = model.space();
    mu.check(k)?;
    let inverses: Vec<PAHomeo> = model.gens().iter().map(PAHomeo::invert).collect();
    let (d, pre) = compatible_depth(k, &inverses, mu.depth);
    if d == 0 && mu.depth > 0 && k.ifs().is_some() {
        return Err(Error::Depth(format!(
            "no cell depth ≥ 1 has generator preimages resolved at depth {}",
            mu.depth
        )));
    }
    let coarse = mu.marginal(k, d)?;
    match (&coarse.masses, &mu.masses) {
        (Masses::Exact(c), Masses::Exact(f)) => {
            let (avg, per) = residuals(c, f, &pre, model.probs());
            Ok(Residual {
                coarse_depth: d,
                max: rational::to_f64(&avg),
                per_generator: per.iter().map(rational::to_f64).collect(),
                exact_max: Some(avg),
                exact_per_generator: Some(per),
            })
        }
        _ => {
            let probs: Vec<f64> = model.probs().iter().map(rational::to_f64).collect();
            let (avg, per) = residuals(&coarse.as_f64(), &mu.as_f64(), &pre, &probs);
            Ok(Residual { coarse_depth: d, max: avg, per_generator: per, exact_max: None, exact_per_generator: None })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub h_estimate: f64,
    /// (generator, Σ_c μ(c) log(μ(c)/μ(g(c)))).
    pub per_generator: Vec<(String, f64)>,
    pub depth: u32,
    /// Cells skipped because μ(c) = 0 or μ(g(c)) = 0, summed over generators.
    pub skipped: usize,
}

/// h ≈ Σ_s P(s) Σ_c μ(c) log(μ(c)/μ(s(c))) over cells c at `depth`, with
/// μ(s(c)) read off μ's own (finer or equal) depth.
pub fn estimate_entropy(mu: &CellMeasure, model: &WalkModel, depth: u32) -> Result<EntropyReport> {
    let k = model.space();
    mu.check(k)?;
    let coarse = mu.marginal(k, depth)?;
    let mut per = Vec::new();
    let mut skipped = 0;
    let mut h = 0.0;
    for (g, (name, p)) in model.gens().iter().zip(model.names().iter().zip(model.probs())) {
        let img = cell_images(k, g, depth, mu.depth).ok_or_else(|| {
            Error::Depth(format!("images of depth-{depth} cells under {name} need cells deeper than {}", mu.depth))
        })?;
        let term = match (&coarse.masses, &mu.masses) {
            (Masses::Exact(c), Masses::Exact(f)) => {
                let mut t = 0.0;
                for (mc, ix) in c.iter().zip(&img) {
                    let ms: Q = ix.iter().map(|&i| &f[i]).sum();
                    if mc.is_zero() || ms.is_zero() {
                        skipped += 1;
                    } else if *mc != ms {
                        t += rational::to_f64(mc) * rational::ln_abs(&(mc / &ms));
                    }
                }
                t
            }
            _ => {
                let (c, f) = (coarse.as_f64(), mu.as_f64());
                let mut t = 0.0;
                for (&mc, ix) in c.iter().zip(&img) {
                    let ms: f64 = ix.iter().map(|&i| f[i]).sum();
                    if mc <= 0.0 || ms <= 0.0 {
                        skipped += 1;
                    } else if mc != ms {
                        t += mc * (mc / ms).ln();
                    }
                }
                t
            }
        };
        h += rational::to_f64(p) * term;
        per.push((name.clone(), term));
    }
    if coarse.as_f64().iter().all(|&m| m <= 0.0) {
        return Err(Error::Argument("measure has no mass".into()));
    }
    Ok(EntropyReport { h_estimate: h, per_generator: per, depth, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::walk::model::*;

    fn uniform(depth: u32, n: usize) -> CellMeasure {
        CellMeasure::exact(depth, vec![q(1, n as i64); n])
    }

    #[test]
    fn klein_uniform_is_invariant() {
        let m = klein_model(0);
        let r = invariance_residual(&uniform(1, 2), &m).unwrap();
        assert_eq!(r.coarse_depth, 1);
        assert_eq!(r.exact_max, Some(Q::zero()));
        let e = estimate_entropy(&uniform(1, 2), &m, 1).unwrap();
        assert_eq!(e.h_estimate, 0.0);
    }

    #[test]
    fn delta_mass_under_swap() {
        let m = h_model(0);
        let mu = CellMeasure::exact(1, vec![q(1, 1), q(0, 1)]);
        let r = invariance_residual(&mu, &m).unwrap();
        assert_eq!(r.exact_max, Some(q(1, 1)));
        assert_eq!(r.exact_per_generator, Some(vec![q(1, 1)]));
    }

    #[test]
    fn identity_model_measures() {
        let m = identity_model(0);
        let mu = estimate_stationary_measure(&m, 1000, 2, 1).unwrap();
        assert_eq!(mu.as_f64(), vec![1.0, 0.0, 0.0, 0.0]);
        let r = invariance_residual(&mu, &m).unwrap();
        assert_eq!(r.max, 0.0);
        assert_eq!(estimate_entropy(&mu, &m, 2).unwrap().h_estimate, 0.0);
    }

    #[test]
    fn klein_estimate_is_uniform() {
        let mu = estimate_stationary_measure(&klein_model(4), 100_000, 1, 4).unwrap();
        for x in mu.as_f64() {
            assert!((x - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn free_estimate_is_nearly_stationary() {
        let m = free_model(5);
        let mu = estimate_stationary_measure(&m, 100_000, 4, 4).unwrap();
        assert!((mu.total() - 1.0).abs() < 1e-12);
        let r = invariance_residual(&mu, &m).unwrap();
        assert_eq!(r.coarse_depth, 2);
        assert!(r.max < 0.02, "{r:?}");
        let e = estimate_entropy(&mu, &m, 2).unwrap();
        assert!(e.h_estimate > 0.0, "{e:?}");
    }

    #[test]
    fn marginals_and_depth_errors() {
        let k = crate::fixtures::ternary();
        let mu = uniform(2, 4);
        assert_eq!(mu.marginal(&k, 1).unwrap(), uniform(1, 2));
        assert!(mu.marginal(&k, 3).is_err());
        assert!(invariance_residual(&uniform(2, 2), &klein_model(0)).is_err());
        assert!(invariance_residual(&uniform(1, 2), &free_model(0)).is_err());
    }
}
