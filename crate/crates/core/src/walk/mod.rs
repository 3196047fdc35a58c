//! Seeded random walks on a generated group and the empirical diagnostics
//! built on them. Sets, maps and images stay exact; only fitted rates and
//! measures are floating point.

mod model;
mod dynamics;
mod measure;

pub use dynamics::*;
pub use measure::*;
pub use model::*;
