//! Self-contained serialized certificates and their exact re-verification.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{Branch, PAHomeo};
use crate::rational::{self, Q};
use crate::space::{CompactSet, Region, SpaceSpec};
use crate::walk::{cell_images, CellMeasure};

use super::contraction::{verify_ping_pong, PingPongCandidate, Verdict};
use super::lp;
use super::measure::{invariance_system, measure_is_invariant, InfeasibilityCertificate, InvariantMeasureCertificate, MeasureOutcome};
use super::morse::{check_morse_smale, MorseSmaleCertificate, MorseSmaleOutcome, PeriodicPoint};
use super::words::{orbit_is_stable, FiniteOrbitCertificate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub label: Vec<String>,
    pub branches: Vec<Branch>,
}

impl MapSpec {
    pub fn of(g: &PAHomeo) -> Self {
        MapSpec { label: g.label().to_vec(), branches: g.branches().to_vec() }
    }

    pub fn build(&self, k: Arc<CompactSet>) -> Result<PAHomeo> {
        PAHomeo::from_branches(k, self.branches.clone(), self.label.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PingPongRegions {
    #[serde(rename = "A1")]
    pub a1: Region,
    #[serde(rename = "B1")]
    pub b1: Region,
    #[serde(rename = "A2")]
    pub a2: Region,
    #[serde(rename = "B2")]
    pub b2: Region,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    PingPong {
        space: SpaceSpec,
        a1: MapSpec,
        a2: MapSpec,
        regions: PingPongRegions,
    },
    InvariantMeasure {
        space: SpaceSpec,
        gens: Vec<MapSpec>,
        depth: u32,
        consistency_depth: u32,
        measure: CellMeasure,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        face: Option<Vec<String>>,
    },
    NoInvariantMeasure {
        space: SpaceSpec,
        gens: Vec<MapSpec>,
        depth: u32,
        fine_depth: u32,
        #[serde(with = "rational::qvec")]
        farkas: Vec<Q>,
    },
    FiniteOrbit {
        space: SpaceSpec,
        gens: Vec<MapSpec>,
        #[serde(with = "rational::qvec")]
        orbit: Vec<Q>,
    },
    MorseSmale {
        space: SpaceSpec,
        g: MapSpec,
        #[serde(rename = "A")]
        a: Region,
        #[serde(rename = "B")]
        b: Region,
        periodic: Vec<PeriodicPoint>,
    },
}

fn specs(gens: &[PAHomeo]) -> Vec<MapSpec> {
    gens.iter().map(MapSpec::of).collect()
}

impl Certificate {
    pub fn ping_pong(c: &PingPongCandidate) -> Self {
        let [a1, b1, a2, b2] = c.regions.clone();
        Certificate::PingPong {
            space: c.a1.space().spec(),
            a1: MapSpec::of(&c.a1),
            a2: MapSpec::of(&c.a2),
            regions: PingPongRegions { a1, b1, a2, b2 },
        }
    }

    pub fn invariant_measure(c: &InvariantMeasureCertificate) -> Self {
        Certificate::InvariantMeasure {
            space: c.gens[0].space().spec(),
            gens: specs(&c.gens),
            depth: c.depth,
            consistency_depth: c.consistency_depth,
            measure: c.measure.clone(),
            face: c.face.clone(),
        }
    }

    pub fn no_invariant_measure(gens: &[PAHomeo], c: &InfeasibilityCertificate) -> Self {
        Certificate::NoInvariantMeasure {
            space: gens[0].space().spec(),
            gens: specs(gens),
            depth: c.depth,
            fine_depth: c.fine_depth,
            farkas: c.farkas.clone(),
        }
    }

    pub fn measure_outcome(gens: &[PAHomeo], m: &MeasureOutcome) -> Self {
        match m {
            MeasureOutcome::Certified(c) => Certificate::invariant_measure(c),
            MeasureOutcome::Infeasible(c) => Certificate::no_invariant_measure(gens, c),
        }
    }

    pub fn finite_orbit(gens: &[PAHomeo], c: &FiniteOrbitCertificate) -> Self {
        Certificate::FiniteOrbit { space: gens[0].space().spec(), gens: specs(gens), orbit: c.orbit.clone() }
    }

    pub fn morse_smale(c: &MorseSmaleCertificate) -> Self {
        Certificate::MorseSmale {
            space: c.g.space().spec(),
            g: MapSpec::of(&c.g),
            a: c.a.clone(),
            b: c.b.clone(),
            periodic: c.periodic.clone(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::PingPong { .. } => "ping-pong",
            Certificate::InvariantMeasure { .. } => "invariant-measure",
            Certificate::NoInvariantMeasure { .. } => "no-invariant-measure",
            Certificate::FiniteOrbit { .. } => "finite-orbit",
            Certificate::MorseSmale { .. } => "morse-smale",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn build_all(k: &Arc<CompactSet>, gens: &[MapSpec]) -> Result<Vec<PAHomeo>> {
    if gens.is_empty() {
        return Err(Error::Argument("certificate lists no generators".into()));
    }
    gens.iter().map(|g| g.build(k.clone())).collect()
}

/// Rebuilds every object from the serialized data and rechecks the claim
/// with exact arithmetic. Malformed data is an error; a false claim is a
/// failing verdict.
pub fn verify_certificate(c: &Certificate) -> Result<Verdict> {
    match c {
        Certificate::PingPong { space, a1, a2, regions } => {
            let k = Arc::new(space.build()?);
            let cand = PingPongCandidate {
                a1: a1.build(k.clone())?,
                a2: a2.build(k)?,
                regions: [regions.a1.clone(), regions.b1.clone(), regions.a2.clone(), regions.b2.clone()],
            };
            Ok(verify_ping_pong(&cand))
        }
        Certificate::InvariantMeasure { space, gens, depth, consistency_depth, measure, .. } => {
            let k = Arc::new(space.build()?);
            let gens = build_all(&k, gens)?;
            if consistency_depth < depth {
                return Ok(Verdict::fail("consistency depth below the certified depth"));
            }
            if measure.depth < *depth {
                return Ok(Verdict::fail("measure is coarser than the certified depth"));
            }
            Ok(if measure_is_invariant(&gens, *depth, measure) {
                Verdict::pass()
            } else {
                Verdict::fail("masses are not an invariant probability vector")
            })
        }
        Certificate::NoInvariantMeasure { space, gens, depth, fine_depth, farkas } => {
            let k = Arc::new(space.build()?);
            let gens = build_all(&k, gens)?;
            let pre: Option<Vec<_>> = gens.iter().map(|g| cell_images(&k, &g.invert(), *depth, *fine_depth)).collect();
            let Some(pre) = pre else {
                return Ok(Verdict::fail("preimages are not resolved at the stated fine depth"));
            };
            let (a, b) = invariance_system(&k, *depth, *fine_depth, &pre, None);
            Ok(if farkas.len() == a.len() && lp::check_farkas(&a, &b, farkas) {
                Verdict::pass()
            } else {
                Verdict::fail("Farkas vector does not certify infeasibility")
            })
        }
        Certificate::FiniteOrbit { space, gens, orbit } => {
            let k = Arc::new(space.build()?);
            let gens = build_all(&k, gens)?;
            Ok(if !orbit.is_empty() && orbit_is_stable(&gens, orbit) {
                Verdict::pass()
            } else {
                Verdict::fail("orbit is empty or not generator-stable")
            })
        }
        Certificate::MorseSmale { space, g, a, b, periodic } => {
            let k = Arc::new(space.build()?);
            let g = g.build(k)?;
            Ok(match check_morse_smale(&g, a, b)? {
                MorseSmaleOutcome::Certified(c) if &c.periodic == periodic => Verdict::pass(),
                MorseSmaleOutcome::Certified(_) => Verdict::fail("listed periodic points differ from the recomputed ones"),
                MorseSmaleOutcome::Rejected(r) => Verdict::fail(r),
            })
        }
    }
}
