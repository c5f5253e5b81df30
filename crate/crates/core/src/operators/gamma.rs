//! Dirac matrices in the standard (Dirac) representation.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

pub type Spin = Matrix4<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    /// Pauli matrices σ_1, σ_2, σ_3.
    pub sigma: [Matrix2<Complex64>; 3],
    pub alpha: [Spin; 3],
    pub beta: Spin,
    /// γ⁰ = β.
    pub gamma0: Spin,
    /// γ^j = γ⁰ α_j.
    pub gamma_spatial: [Spin; 3],
    /// Spin matrices Σ_c = diag(σ_c, σ_c) = -i α_a α_b for cyclic (a, b, c).
    pub spin: [Spin; 3],
}

fn block(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>, c: &Matrix2<Complex64>, d: &Matrix2<Complex64>) -> Spin {
    let mut m = Spin::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(b);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(c);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(d);
    m
}

pub fn build_gammas() -> GammaSet {
    let sigma = [
        Matrix2::new(ZERO, ONE, ONE, ZERO),
        Matrix2::new(ZERO, -I, I, ZERO),
        Matrix2::new(ONE, ZERO, ZERO, -ONE),
    ];
    let zero = Matrix2::zeros();
    let id = Matrix2::identity();
    let alpha = [0, 1, 2].map(|j| block(&zero, &sigma[j], &sigma[j], &zero));
    let beta = block(&id, &zero, &zero, &(-id));
    let gamma_spatial = alpha.map(|a| beta * a);
    let spin = [0, 1, 2].map(|j| block(&sigma[j], &zero, &zero, &sigma[j]));
    GammaSet {
        sigma,
        alpha,
        beta,
        gamma0: beta,
        gamma_spatial,
        spin,
    }
}

impl GammaSet {
    /// `[α_a, α_b]`.
    pub fn alpha_commutator(&self, a: usize, b: usize) -> Spin {
        self.alpha[a] * self.alpha[b] - self.alpha[b] * self.alpha[a]
    }
}
