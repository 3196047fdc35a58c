//! Exact certificates: displacement words, finite orbits, ping-pong pairs,
//! invariant measures and Morse-Smale elements. Every positive answer is
//! rechecked with exact arithmetic before it is returned.

mod cert;
mod contraction;
mod lp;
mod measure;
mod morse;
mod words;

pub use cert::*;
pub use contraction::*;
pub use lp::{check_farkas, check_feasible, solve as solve_lp, LpOutcome};
pub use measure::*;
pub use morse::*;
pub use words::*;
