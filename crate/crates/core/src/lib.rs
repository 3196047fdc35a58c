//! Exact dynamics of finitely generated groups of piecewise-affine
//! homeomorphisms of compact subsets of the line.

pub mod error;
pub mod rational;
pub mod space;

pub use error::{Error, Result};
pub use rational::Q;
pub mod fixtures;
pub mod giet;
pub mod maps;
pub mod walk;
pub mod certify;
