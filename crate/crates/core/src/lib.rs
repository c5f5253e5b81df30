//! Dirac operator on asymptotically flat 3-manifolds: metric families,
//! spin geometry, spectral grid operators, time evolution and the
//! dispersive functionals measured on the resulting flows.

pub mod error;
pub mod geometry;
mod jet;
pub mod metric;
pub mod operators;
pub mod evolution;
pub mod harness;
pub mod norms;

pub use error::{Error, Result};
