use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use cantor_tits::giet::{Giet, GietBranch};
use cantor_tits::maps::{Branch, PAHomeo, PrefixTable};
use cantor_tits::rational::{self, Q};
use cantor_tits::space::{CompactSet, Region, SpaceSpec};
use cantor_tits::walk::WalkModel;
use serde::{Deserialize, Serialize};

/// Exact rational read from and written as a "p/q" string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rat(#[serde(with = "rational::qstr")] pub Q);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    CertifyFree,
    FindMeasure,
    MorseSmale,
    GietBlowup,
    Verify,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::CertifyFree => "certify-free",
            Kind::FindMeasure => "find-measure",
            Kind::MorseSmale => "morse-smale",
            Kind::GietBlowup => "giet-blowup",
            Kind::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GietSpec {
    pub interval: (Rat, Rat),
    pub branches: Vec<GietBranch>,
}

/// Exactly one of `prefix`, `branches` or `giet` is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<PrefixTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<Branch>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub giet: Option<GietSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    /// Walk horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<u32>,
    /// Cell depth for measures and scans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_cap: Option<usize>,
    /// Longest word tried by the certificate searches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Length of the stationary-measure chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Closure level of the GIET blow-up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Weight ratio of the GIET blow-up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Rat>,
    /// Word length of the free-group sanity check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sanity_len: Option<usize>,
    /// Generator checked directly by morse-smale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionPair {
    #[serde(rename = "A")]
    pub a: Region,
    #[serde(rename = "B")]
    pub b: Region,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub emit_series: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<GeneratorSpec>,
    /// Add the inverse of every generator not already an involution.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub symmetrize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<Rat>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budgets: BudgetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Named budget defaults, selected by the CANTOR_TITS_PROFILE variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Quick,
    Default,
    Thorough,
}

pub const PROFILE_VAR: &str = "CANTOR_TITS_PROFILE";

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Profile::Quick),
            "default" | "" => Ok(Profile::Default),
            "thorough" => Ok(Profile::Thorough),
            other => bail!("unknown budget profile `{other}` (expected quick, default or thorough)"),
        }
    }

    pub fn from_env() -> Result<Self> {
        match std::env::var(PROFILE_VAR) {
            Ok(v) => Profile::parse(&v),
            Err(_) => Ok(Profile::Default),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Quick => "quick",
            Profile::Default => "default",
            Profile::Thorough => "thorough",
        }
    }
}

/// Budgets with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Budgets {
    pub n: usize,
    pub runs: usize,
    #[serde(with = "rational::qstr")]
    pub eps: Q,
    pub max_len: usize,
    pub d_max: u32,
    pub depth: u32,
    pub p_cap: usize,
    pub n_max: usize,
    pub steps: usize,
    pub level: usize,
    #[serde(with = "rational::qstr")]
    pub rho: Q,
    pub sanity_len: usize,
    pub map: Option<String>,
}

impl BudgetSpec {
    pub fn resolve(&self, profile: Profile) -> Budgets {
        let (n, runs, steps, d_max) = match profile {
            Profile::Quick => (20, 10, 5_000, 5),
            Profile::Default => (40, 100, 20_000, 6),
            Profile::Thorough => (60, 400, 100_000, 8),
        };
        Budgets {
            n: self.n.unwrap_or(n),
            runs: self.runs.unwrap_or(runs),
            eps: self.eps.clone().map_or_else(|| rational::q(1, 27), |r| r.0),
            max_len: self.max_len.unwrap_or(6),
            d_max: self.d_max.unwrap_or(d_max),
            depth: self.depth.unwrap_or(3),
            p_cap: self.p_cap.unwrap_or(4),
            n_max: self.n_max.unwrap_or(40),
            steps: self.steps.unwrap_or(steps),
            level: self.level.unwrap_or(3),
            rho: self.rho.clone().map_or_else(|| rational::q(1, 3), |r| r.0),
            sanity_len: self.sanity_len.unwrap_or(8),
            map: self.map.clone(),
        }
    }
}

/// Generators and walk built from a validated scenario.
pub struct Instance {
    pub space: Option<Arc<CompactSet>>,
    pub gens: Vec<PAHomeo>,
    pub giets: Vec<Giet>,
    pub model: Option<WalkModel>,
}

impl Instance {
    pub fn generator(&self, name: &str) -> Option<&PAHomeo> {
        self.gens.iter().find(|g| g.label().join(" ") == name)
    }

    pub fn model(&self) -> Result<&WalkModel> {
        self.model.as_ref().ok_or_else(|| anyhow!("scenario defines no random walk"))
    }
}

fn build_generator(spec: &GeneratorSpec, k: &Arc<CompactSet>) -> Result<PAHomeo> {
    let label = vec![spec.name.clone()];
    match (&spec.prefix, &spec.branches, &spec.giet) {
        (Some(t), None, None) => Ok(PAHomeo::from_prefix_table(t, k.clone(), &spec.name)?),
        (None, Some(b), None) => Ok(PAHomeo::from_branches(k.clone(), b.clone(), label)?),
        (None, None, Some(_)) => bail!("generator `{}` is a GIET; only giet-blowup accepts GIETs", spec.name),
        _ => bail!("generator `{}` must give exactly one of prefix, branches or giet", spec.name),
    }
}

impl Scenario {
    /// Checks cross-field constraints and builds the maps and the walk.
    pub fn build(&self) -> Result<Instance> {
        let mut seen = Vec::new();
        for g in &self.generators {
            if g.name.is_empty() {
                bail!("generators: a generator has an empty name");
            }
            if seen.contains(&&g.name) {
                bail!("generators: duplicate name `{}`", g.name);
            }
            seen.push(&g.name);
        }
        match self.kind {
            Kind::Verify => {
                if self.certificate.is_none() {
                    bail!("certificate: a verify scenario needs a certificate path");
                }
                return Ok(Instance { space: None, gens: vec![], giets: vec![], model: None });
            }
            Kind::GietBlowup => {
                if self.generators.is_empty() {
                    bail!("generators: giet-blowup needs at least one GIET");
                }
                let giets = self
                    .generators
                    .iter()
                    .map(|g| match (&g.giet, &g.prefix, &g.branches) {
                        (Some(s), None, None) => Ok(Giet::from_branches((s.interval.0 .0.clone(), s.interval.1 .0.clone()), s.branches.clone(), &g.name)?),
                        _ => bail!("generator `{}`: giet-blowup generators must be GIETs", g.name),
                    })
                    .collect::<Result<Vec<_>>>()?;
                return Ok(Instance { space: None, gens: vec![], giets, model: None });
            }
            _ => {}
        }
        let space = self.space.as_ref().ok_or_else(|| anyhow!("space: missing for kind {}", self.kind.name()))?;
        let k = Arc::new(space.build().context("space")?);
        if self.generators.is_empty() {
            bail!("generators: at least one generator is required");
        }
        let mut gens = self
            .generators
            .iter()
            .map(|g| build_generator(g, &k).with_context(|| format!("generator `{}`", g.name)))
            .collect::<Result<Vec<_>>>()?;
        if self.symmetrize {
            let inverses: Vec<PAHomeo> = gens.iter().map(PAHomeo::invert).filter(|gi| !gens.contains(gi)).collect();
            gens.extend(inverses);
        }
        let probs = match &self.probabilities {
            Some(p) => {
                if p.len() != gens.len() {
                    bail!("probabilities: {} given for {} generators", p.len(), gens.len());
                }
                p.iter().map(|r| r.0.clone()).collect()
            }
            None => vec![Q::new(1.into(), (gens.len() as i64).into()); gens.len()],
        };
        let model = WalkModel::new(gens.clone(), probs, self.seed).context("probabilities")?;
        let inst = Instance { space: Some(k), gens, giets: vec![], model: Some(model) };
        if let Some(name) = &self.budgets.map {
            if inst.generator(name).is_none() {
                bail!("budgets.map: unknown generator name `{name}`");
            }
        }
        if self.kind == Kind::MorseSmale && self.budgets.map.is_some() && self.regions.is_none() {
            bail!("regions: a morse-smale check of a named map needs regions A and B");
        }
        Ok(inst)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| anyhow!("scenario schema: {e}"))?;
    s.build()?;
    Ok(s)
}

pub fn to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenarios serialize")
}

/// Scenario files shipped with the binary.
pub const FIXTURES: [(&str, &str); 5] = [
    ("free_pair.json", include_str!("../fixtures/free_pair.json")),
    ("klein_four.json", include_str!("../fixtures/klein_four.json")),
    ("g3.json", include_str!("../fixtures/g3.json")),
    ("rotation_third.json", include_str!("../fixtures/rotation_third.json")),
    ("identity.json", include_str!("../fixtures/identity.json")),
];

pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name || n.trim_end_matches(".json") == name).map(|(_, t)| *t)
}
