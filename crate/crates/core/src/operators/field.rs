//! Spinor fields on the periodic grid and fast Dirac-representation algebra.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::Grid;

pub type Spinor = [Complex64; 4];

pub const C0: Complex64 = Complex64::new(0.0, 0.0);
pub const IM: Complex64 = Complex64::new(0.0, 1.0);

/// Complex 4-component field stored component-major, z fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: Grid,
    data: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![C0; 4 * grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> Spinor) -> Self {
        let mut field = Self::zeros(grid);
        let n3 = grid.len();
        for p in 0..n3 {
            let v = f(grid.point(p));
            for (c, z) in v.into_iter().enumerate() {
                field.data[c * n3 + p] = z;
            }
        }
        field
    }

    pub fn from_raw(grid: Grid, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), 4 * grid.len(), "raw buffer has the wrong length");
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<Complex64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n3 = self.grid.len();
        &self.data[c * n3..(c + 1) * n3]
    }

    pub fn node(&self, p: usize) -> Spinor {
        let n3 = self.grid.len();
        [self.data[p], self.data[n3 + p], self.data[2 * n3 + p], self.data[3 * n3 + p]]
    }

    pub fn set_node(&mut self, p: usize, v: Spinor) {
        let n3 = self.grid.len();
        for (c, z) in v.into_iter().enumerate() {
            self.data[c * n3 + p] = z;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, s: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += a · other`.
    pub fn add_scaled(&mut self, a: Complex64, other: &SpinorField) {
        debug_assert_eq!(self.grid, other.grid);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &SpinorField) -> SpinorField {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(-1.0, 0.0), other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        let n3 = self.grid.len();
        (0..n3).map(|p| spinor_norm(&self.node(p))).fold(0.0, f64::max)
    }

    /// Unweighted `Σ |u|² Δx³`.
    pub fn flat_norm_squared(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }
}

pub fn spinor_norm(v: &Spinor) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn spinor_dot(a: &Spinor, b: &Spinor) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn add(a: Spinor, b: Spinor) -> Spinor {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

#[inline]
pub fn scale(s: Complex64, a: Spinor) -> Spinor {
    [s * a[0], s * a[1], s * a[2], s * a[3]]
}

#[inline]
pub fn scale_re(s: f64, a: Spinor) -> Spinor {
    [a[0] * s, a[1] * s, a[2] * s, a[3] * s]
}

/// `σ_c v` on a 2-spinor.
#[inline]
fn sigma(c: usize, v0: Complex64, v1: Complex64) -> (Complex64, Complex64) {
    match c {
        0 => (v1, v0),
        1 => (-IM * v1, IM * v0),
        _ => (v0, -v1),
    }
}

/// `α_a ψ` in the Dirac representation.
#[inline]
pub fn alpha(a: usize, psi: Spinor) -> Spinor {
    let (u0, u1) = sigma(a, psi[2], psi[3]);
    let (l0, l1) = sigma(a, psi[0], psi[1]);
    [u0, u1, l0, l1]
}

/// `β ψ`.
#[inline]
pub fn beta(psi: Spinor) -> Spinor {
    [psi[0], psi[1], -psi[2], -psi[3]]
}

/// Element `s·I₄ + i Σ_c v_c Σ_c` of the even Clifford algebra, which holds
/// the connection matrices and every zeroth-order spin term built from them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpinRotation {
    pub scalar: f64,
    pub axial: [f64; 3],
}

impl SpinRotation {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Projects a 4×4 matrix onto the span, returning the projection and the
    /// max-entry residual of the reconstruction.
    pub fn project(m: &super::gamma::Spin, spin: &[super::gamma::Spin; 3]) -> (Self, f64) {
        let scalar = m.trace().re / 4.0;
        let axial = std::array::from_fn(|c| (spin[c] * m).trace().im / 4.0);
        let out = Self { scalar, axial };
        let residual = (out.to_matrix(spin) - m)
            .iter()
            .fold(0.0f64, |acc, z| acc.max(z.norm()));
        (out, residual)
    }

    pub fn to_matrix(&self, spin: &[super::gamma::Spin; 3]) -> super::gamma::Spin {
        let mut m = super::gamma::Spin::identity() * Complex64::new(self.scalar, 0.0);
        for c in 0..3 {
            m += spin[c] * Complex64::new(0.0, self.axial[c]);
        }
        m
    }

    #[inline]
    pub fn apply(&self, psi: Spinor) -> Spinor {
        let [v1, v2, v3] = self.axial;
        let s = self.scalar;
        let block = |a: Complex64, b: Complex64| {
            // (s + i v·σ)(a, b)
            let r0 = a * s + IM * (a * v3 + b * Complex64::new(v1, -v2));
            let r1 = b * s + IM * (a * Complex64::new(v1, v2) - b * v3);
            (r0, r1)
        };
        let (a0, a1) = block(psi[0], psi[1]);
        let (b0, b1) = block(psi[2], psi[3]);
        [a0, a1, b0, b1]
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            scalar: self.scalar + other.scalar,
            axial: std::array::from_fn(|c| self.axial[c] + other.axial[c]),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            scalar: self.scalar * s,
            axial: self.axial.map(|v| v * s),
        }
    }
}

/// Modulated Gaussian `e^{ik·x} e^{-|x-x₀|²/(2w²)} e_p`.
pub fn wavepacket(
    grid: Grid,
    center: [f64; 3],
    width: f64,
    carrier: [f64; 3],
    polarization: usize,
) -> SpinorField {
    SpinorField::from_fn(grid, |x| {
        let d2: f64 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum();
        let phase: f64 = (0..3).map(|i| carrier[i] * x[i]).sum();
        let amp = (-d2 / (2.0 * width * width)).exp();
        let mut v = [C0; 4];
        v[polarization] = Complex64::from_polar(amp, phase);
        v
    })
}
