use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;
use crate::rational::{self, Q};

use super::CompactSet;

/// Serializable description of a compact set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpaceSpec {
    /// The middle-thirds set on [0,1].
    Ternary { depth: u32 },
    Ifs {
        #[serde(with = "rational::qvec")]
        ratios: Vec<Q>,
        #[serde(with = "rational::qvec")]
        offsets: Vec<Q>,
        depth: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alphabet: Option<String>,
    },
    Intervals {
        #[serde(with = "qpairs")]
        intervals: Vec<(Q, Q)>,
    },
}

impl SpaceSpec {
    pub fn build(&self) -> Result<CompactSet> {
        match self {
            SpaceSpec::Ternary { depth } => Ok(CompactSet::ternary_cantor(*depth)),
            SpaceSpec::Ifs { ratios, offsets, depth, alphabet } => CompactSet::from_ifs(
                ratios.clone(),
                offsets.clone(),
                *depth,
                alphabet.as_ref().map(|a| a.chars().collect()),
            ),
            SpaceSpec::Intervals { intervals } => CompactSet::make(intervals.clone()),
        }
    }
}

impl CompactSet {
    pub fn spec(&self) -> SpaceSpec {
        match self.ifs() {
            Some(f) => SpaceSpec::Ifs {
                ratios: f.ratios.clone(),
                offsets: f.offsets.clone(),
                depth: f.depth,
                alphabet: Some(f.alphabet.iter().collect()),
            },
            None => SpaceSpec::Intervals {
                intervals: self.intervals().iter().map(|i| (i.lo.clone(), i.hi.clone())).collect(),
            },
        }
    }
}

mod qpairs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[(Q, Q)], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|(a, b)| [rational::fmt_q(a), rational::fmt_q(b)]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<(Q, Q)>, D::Error> {
        Vec::<[String; 2]>::deserialize(d)?
            .iter()
            .map(|[a, b]| {
                let p = |x: &str| rational::parse_q(x).map_err(serde::de::Error::custom);
                Ok((p(a)?, p(b)?))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn specs_round_trip() {
        let k = CompactSet::ternary_cantor(4);
        let s = k.spec();
        let back: SpaceSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back.build().unwrap(), k);
        let e = CompactSet::make(vec![(q(0, 1), q(1, 4)), (q(1, 2), q(1, 1))]).unwrap();
        assert_eq!(e.spec().build().unwrap(), e);
        let t: SpaceSpec = serde_json::from_str(r#"{"type":"ternary","depth":3}"#).unwrap();
        assert!(t.build().unwrap().same_set(&k));
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"type":"intervals","intervals":[["1/0","1"]]}"#).is_err());
    }
}
