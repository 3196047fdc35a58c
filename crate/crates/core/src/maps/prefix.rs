use std::collections::HashSet;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{Branch, PAHomeo};
use crate::error::{Error, Result};
use crate::rational::Q;
use crate::space::CompactSet;

/// One prefix-replacement rule I_src → I_dst.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixRule {
    pub src: String,
    pub dst: String,
    #[serde(default = "plus")]
    pub sign: i8,
}

fn plus() -> i8 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixTable {
    pub rules: Vec<PrefixRule>,
}

impl PrefixTable {
    pub fn new(rules: &[(&str, &str, i8)]) -> Self {
        PrefixTable {
            rules: rules
                .iter()
                .map(|&(s, d, g)| PrefixRule { src: s.to_string(), dst: d.to_string(), sign: g })
                .collect(),
        }
    }
}

fn check_antichain(words: &[Vec<usize>], arity: usize, what: &str) -> Result<()> {
    let set: HashSet<&Vec<usize>> = words.iter().collect();
    if set.len() != words.len() {
        return Err(Error::InvalidMap(format!("{what} addresses repeat")));
    }
    for w in words {
        for k in 0..w.len() {
            if set.contains(&w[..k].to_vec()) {
                return Err(Error::InvalidMap(format!("{what} addresses overlap (one is a prefix of another)")));
            }
        }
    }
    let m = Q::from_integer((arity as i64).into());
    let total: Q = words.iter().fold(Q::zero(), |acc, w| acc + Q::one() / num_traits::pow(m.clone(), w.len()));
    if !total.is_one() {
        return Err(Error::InvalidMap(format!("{what} addresses do not cover every infinite address")));
    }
    Ok(())
}

impl PAHomeo {
    /// Prefix-replacement map: the cylinder of each rule's source address is
    /// sent affinely onto the cylinder of its target address.
    pub fn from_prefix_table(table: &PrefixTable, space: Arc<CompactSet>, name: &str) -> Result<Self> {
        let ifs = space.ifs().ok_or_else(|| Error::InvalidSet("prefix tables need an IFS set".into()))?;
        if table.rules.is_empty() {
            return Err(Error::InvalidMap("empty prefix table".into()));
        }
        let mut srcs = Vec::new();
        let mut dsts = Vec::new();
        for r in &table.rules {
            if r.sign != 1 && r.sign != -1 {
                return Err(Error::InvalidMap(format!("orientation must be ±1, got {}", r.sign)));
            }
            srcs.push(space.parse_address(&r.src)?);
            dsts.push(space.parse_address(&r.dst)?);
        }
        let longest = srcs.iter().chain(dsts.iter()).map(Vec::len).max().unwrap_or(0);
        if longest > ifs.depth as usize {
            return Err(Error::Depth(format!("table needs depth {longest}, set has depth {}", ifs.depth)));
        }
        check_antichain(&srcs, ifs.arity(), "source")?;
        check_antichain(&dsts, ifs.arity(), "target")?;
        if table.rules.iter().any(|r| r.sign < 0) && !ifs.is_symmetric() {
            return Err(Error::InvalidMap("orientation reversal needs a symmetric IFS".into()));
        }
        let mut branches: Vec<Branch> = srcs
            .iter()
            .zip(&dsts)
            .zip(&table.rules)
            .map(|((s, d), r)| {
                let (a, b) = (ifs.cell(s), ifs.cell(d));
                let ratio = b.len() / a.len();
                if r.sign > 0 {
                    let offset = &b.lo - &ratio * &a.lo;
                    Branch::new(a.lo, a.hi, ratio, offset)
                } else {
                    let offset = &b.hi + &ratio * &a.lo;
                    Branch::new(a.lo, a.hi, -ratio, offset)
                }
            })
            .collect();
        branches.sort();
        let label = if name.is_empty() { Vec::new() } else { vec![name.to_string()] };
        Ok(PAHomeo::from_trusted(space, branches, label))
    }
}
