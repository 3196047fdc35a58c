use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::fixtures;
use crate::maps::PAHomeo;
use crate::rational::{self, Q};
use crate::space::CompactSet;

/// Seed for run `index` of a batch started from `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct WalkModel {
    space: Arc<CompactSet>,
    gens: Vec<PAHomeo>,
    names: Vec<String>,
    probs: Vec<Q>,
    thresholds: Vec<u64>,
    seed: u64,
    symmetric: bool,
}

fn gen_name(g: &PAHomeo) -> String {
    g.label().join(" ")
}

impl WalkModel {
    pub fn new(gens: Vec<PAHomeo>, probs: Vec<Q>, seed: u64) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::Model("a walk needs at least one generator".into()));
        }
        if gens.len() != probs.len() {
            return Err(Error::Model(format!("{} generators but {} probabilities", gens.len(), probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_positive()) {
            return Err(Error::Model(format!("probability {p} is not positive")));
        }
        let total: Q = probs.iter().sum();
        if !total.is_one() {
            return Err(Error::Model(format!("probabilities sum {} ≠ 1", rational::fmt_q(&total))));
        }
        let space = gens[0].space().clone();
        if gens.iter().any(|g| !Arc::ptr_eq(g.space(), &space) && !g.space().same_set(&space)) {
            return Err(Error::SpaceMismatch);
        }
        let names: Vec<String> = gens.iter().map(gen_name).collect();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::Model(format!("generator {i} has no name")));
            }
            if names[..i].contains(n) {
                return Err(Error::Model(format!("duplicate generator name {n}")));
            }
        }
        let symmetric = gens.iter().zip(&probs).all(|(g, p)| {
            let gi = g.invert();
            gens.iter().zip(&probs).any(|(h, ph)| ph == p && *h == gi)
        });
        let two64: BigInt = BigInt::one() << 64;
        let mut acc = Q::zero();
        let mut thresholds = Vec::with_capacity(probs.len());
        for p in &probs {
            acc += p;
            let t = (&acc * Q::from_integer(two64.clone())).floor().to_integer();
            thresholds.push(t.to_u64().unwrap_or(u64::MAX));
        }
        Ok(WalkModel { space, gens, names, probs, thresholds, seed, symmetric })
    }

    pub fn uniform(gens: Vec<PAHomeo>, seed: u64) -> Result<Self> {
        let n = gens.len() as i64;
        WalkModel::new(gens, vec![rational::q(1, n.max(1)); n as usize], seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        WalkModel { seed, ..self.clone() }
    }

    pub fn space(&self) -> &Arc<CompactSet> {
        &self.space
    }

    pub fn gens(&self) -> &[PAHomeo] {
        &self.gens
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn probs(&self) -> &[Q] {
        &self.probs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub(crate) fn pick(&self, u: u64) -> usize {
        self.thresholds.iter().position(|&t| u < t).unwrap_or(self.gens.len() - 1)
    }

    pub fn trajectory(&self, seed: u64) -> Trajectory<'_> {
        Trajectory::with_prefix(self, seed, Vec::new())
    }

    /// Trajectory of run `index`, seeded by `derive_seed(model seed, index)`.
    pub fn run(&self, index: u64) -> Trajectory<'_> {
        self.trajectory(derive_seed(self.seed, index))
    }
}

/// Letter stream ω: step k reads ChaCha8 word position 2k under the
/// trajectory seed.
pub struct Trajectory<'m> {
    model: &'m WalkModel,
    seed: u64,
    rng: ChaCha8Rng,
    letters: Vec<usize>,
    forward: Vec<PAHomeo>,
    backward: Vec<PAHomeo>,
}

impl<'m> Trajectory<'m> {
    /// A trajectory whose first letters are fixed; later letters follow the
    /// stream at the same step index.
    pub fn with_prefix(model: &'m WalkModel, seed: u64, prefix: Vec<usize>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(2 * prefix.len() as u128);
        let id = PAHomeo::identity(model.space.clone());
        Trajectory { model, seed, rng, letters: prefix, forward: vec![id.clone()], backward: vec![id] }
    }

    pub fn model(&self) -> &'m WalkModel {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn extend(&mut self, n: usize) {
        while self.letters.len() < n {
            let u = self.rng.next_u64();
            self.letters.push(self.model.pick(u));
        }
    }

    pub fn letter(&mut self, k: usize) -> usize {
        self.extend(k + 1);
        self.letters[k]
    }

    pub fn letters(&mut self, n: usize) -> &[usize] {
        self.extend(n);
        &self.letters[..n]
    }

    pub fn word_names(&mut self, n: usize) -> Vec<String> {
        let m = self.model;
        self.letters(n).iter().map(|&i| m.names[i].clone()).collect()
    }

    /// f_{ω_{n−1}} ∘ ⋯ ∘ f_{ω_0}.
    pub fn forward_word(&mut self, n: usize) -> PAHomeo {
        self.extend(n);
        while self.forward.len() <= n {
            let k = self.forward.len() - 1;
            let g = &self.model.gens[self.letters[k]];
            let next = g.compose(&self.forward[k]).expect("generators share the space");
            self.forward.push(next);
        }
        self.forward[n].clone()
    }

    /// f_{ω_0} ∘ ⋯ ∘ f_{ω_{n−1}}.
    pub fn backward_word(&mut self, n: usize) -> PAHomeo {
        self.extend(n);
        while self.backward.len() <= n {
            let k = self.backward.len() - 1;
            let g = &self.model.gens[self.letters[k]];
            let next = self.backward[k].compose(g).expect("generators share the space");
            self.backward.push(next);
        }
        self.backward[n].clone()
    }

    /// x, f_{ω_0}(x), f_{ω_1}f_{ω_0}(x), … up to step n.
    pub fn forward_orbit(&mut self, x: &Q, n: usize) -> Vec<Q> {
        self.extend(n);
        let mut out = Vec::with_capacity(n + 1);
        let mut y = x.clone();
        out.push(y.clone());
        for k in 0..n {
            y = self.model.gens[self.letters[k]].apply_member(&y);
            out.push(y.clone());
        }
        out
    }

    /// f̄^k(x) for k = 0..=n, each evaluated from the innermost letter.
    pub fn backward_points(&mut self, x: &Q, from: usize, n: usize) -> Vec<Q> {
        self.extend(n);
        (from..=n)
            .map(|k| {
                let mut y = x.clone();
                for j in (0..k).rev() {
                    y = self.model.gens[self.letters[j]].apply_member(&y);
                }
                y
            })
            .collect()
    }
}

pub fn identity_model(seed: u64) -> WalkModel {
    let id = PAHomeo::identity(fixtures::ternary()).with_label(vec!["I".into()]);
    WalkModel::uniform(vec![id], seed).expect("valid model")
}

pub fn klein_model(seed: u64) -> WalkModel {
    WalkModel::uniform(vec![fixtures::h(), fixtures::r()], seed).expect("valid model")
}

pub fn free_model(seed: u64) -> WalkModel {
    WalkModel::uniform(fixtures::free_generators(), seed).expect("valid model")
}

pub fn g3_model(seed: u64) -> WalkModel {
    WalkModel::uniform(vec![fixtures::g3()], seed).expect("valid model")
}

pub fn a1_model(seed: u64) -> WalkModel {
    WalkModel::uniform(vec![fixtures::a1()], seed).expect("valid model")
}

pub fn h_model(seed: u64) -> WalkModel {
    WalkModel::uniform(vec![fixtures::h()], seed).expect("valid model")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn model_validation() {
        let g = fixtures::g3();
        assert!(WalkModel::new(vec![g.clone(), fixtures::h()], vec![q(1, 2), q(1, 3)], 0).is_err());
        assert!(WalkModel::new(vec![g.clone(), g.clone()], vec![q(1, 2), q(1, 2)], 0).is_err());
        assert!(WalkModel::new(vec![g.clone()], vec![q(0, 1)], 0).is_err());
        assert!(free_model(0).symmetric());
        assert!(klein_model(0).symmetric());
        assert!(!g3_model(0).symmetric());
    }

    #[test]
    fn picks_follow_probabilities() {
        let m = WalkModel::new(vec![fixtures::g3(), fixtures::h()], vec![q(1, 4), q(3, 4)], 7).unwrap();
        assert_eq!(m.pick(0), 0);
        assert_eq!(m.pick(1u64 << 62), 1);
        assert_eq!(m.pick(u64::MAX), 1);
        let mut t = m.trajectory(1);
        let n = 20000;
        let zeros = t.letters(n).iter().filter(|&&i| i == 0).count() as f64 / n as f64;
        assert!((zeros - 0.25).abs() < 0.02);
    }

    #[test]
    fn stream_is_random_access() {
        let m = free_model(3);
        let mut a = m.trajectory(99);
        let tail: Vec<usize> = a.letters(10)[5..].to_vec();
        let prefix = a.letters(5).to_vec();
        let mut b = Trajectory::with_prefix(&m, 99, prefix);
        assert_eq!(&b.letters(10)[5..], &tail[..]);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    #[test]
    fn words_follow_definition_order() {
        let m = WalkModel::uniform(vec![fixtures::g3(), fixtures::h()], 0).unwrap();
        let mut t = Trajectory::with_prefix(&m, 0, vec![0, 1]);
        assert!(t.forward_word(0).is_identity());
        assert!(t.backward_word(0).is_identity());
        let (g, h) = (fixtures::g3(), fixtures::h());
        assert_eq!(t.forward_word(2), h.compose(&g).unwrap());
        assert_eq!(t.backward_word(2), g.compose(&h).unwrap());
        assert_eq!(t.forward_word(2).label(), ["H", "G3"]);
    }

    #[test]
    fn forward_word_matches_pointwise() {
        let m = free_model(11);
        let mut t = m.trajectory(5);
        let w = t.forward_word(6);
        let k = m.space();
        for i in 0..20 {
            let x = k.ceil_point(&q(i, 20)).unwrap();
            let orbit = t.forward_orbit(&x, 6);
            assert_eq!(w.apply(&x).unwrap(), orbit[6]);
            let b = t.backward_word(6);
            assert_eq!(b.apply(&x).unwrap(), t.backward_points(&x, 6, 6)[0]);
        }
    }
}
