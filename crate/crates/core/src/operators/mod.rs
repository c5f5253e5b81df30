//! Dirac matrices, the periodic grid and the grid-level operators.

pub mod dirac;
pub mod field;
pub mod gamma;
pub mod geofield;
pub mod grid;

pub use dirac::{
    apply_dirac, apply_dirac_direct, gradient, inner_mh, norm_mh, perturbation_terms,
    scalar_laplace_beltrami, spectral_derivative, spectral_tail, squared_operator,
    squaring_residual, SquaringResidual,
};
pub use field::{wavepacket, SpinRotation, Spinor, SpinorField};
pub use gamma::{build_gammas, GammaSet, Spin};
pub use geofield::{GeometryField, NodeGeometry};
pub use grid::{Grid, Spectral};
