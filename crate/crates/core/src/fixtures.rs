//! Canonical instances on the ternary Cantor set (alphabet {0,2}).

use std::sync::{Arc, OnceLock};

use crate::maps::{PAHomeo, PrefixTable};
use crate::space::CompactSet;

/// Approximation depth carried by the shared ternary set.
pub const TERNARY_DEPTH: u32 = 6;

pub fn ternary() -> Arc<CompactSet> {
    static K: OnceLock<Arc<CompactSet>> = OnceLock::new();
    K.get_or_init(|| Arc::new(CompactSet::ternary_cantor(TERNARY_DEPTH))).clone()
}

pub fn h_table() -> PrefixTable {
    PrefixTable::new(&[("0", "2", 1), ("2", "0", 1)])
}

pub fn r_table() -> PrefixTable {
    PrefixTable::new(&[("", "", -1)])
}

pub fn g3_table() -> PrefixTable {
    PrefixTable::new(&[("0", "00", 1), ("20", "02", 1), ("22", "2", 1)])
}

pub fn a1_table() -> PrefixTable {
    PrefixTable::new(&[("0", "020", 1), ("20", "022", 1), ("220", "00", 1), ("222", "2", 1)])
}

pub fn a2_table() -> PrefixTable {
    PrefixTable::new(&[("2", "202", 1), ("02", "200", 1), ("000", "22", 1), ("002", "0", 1)])
}

fn build(table: PrefixTable, name: &str) -> PAHomeo {
    PAHomeo::from_prefix_table(&table, ternary(), name).expect("fixture table is valid")
}

/// Swaps the two halves.
pub fn h() -> PAHomeo {
    build(h_table(), "H")
}

/// x ↦ 1 − x.
pub fn r() -> PAHomeo {
    build(r_table(), "R")
}

pub fn g3() -> PAHomeo {
    build(g3_table(), "G3")
}

pub fn a1() -> PAHomeo {
    build(a1_table(), "A1")
}

pub fn a2() -> PAHomeo {
    build(a2_table(), "A2")
}

/// A1, A2 and their inverses.
pub fn free_generators() -> Vec<PAHomeo> {
    let (a1, a2) = (a1(), a2());
    vec![a1.invert(), a2.invert(), a1, a2]
}
