//! Grid operators: spectral derivatives, the Dirac operator, the scalar
//! Laplace–Beltrami operator, the perturbation terms and the squaring
//! identity residual.

use nalgebra::Matrix2;
use num_complex::Complex64;

use super::field::{add, beta, scale, scale_re, Spinor, SpinorField, C0, IM};
use super::geofield::GeometryField;
use super::grid::Spectral;
use crate::error::{Error, Result};

/// Spectral tail above which a field counts as under-resolved.
pub const RESOLUTION_THRESHOLD: f64 = 1e-8;

type Mat2 = Matrix2<Complex64>;

/// `Σ_a e_a σ_a` for a real 3-vector.
#[inline]
fn pauli_dot(v: [f64; 3]) -> Mat2 {
    Mat2::new(
        Complex64::new(v[2], 0.0),
        Complex64::new(v[0], -v[1]),
        Complex64::new(v[0], v[1]),
        Complex64::new(-v[2], 0.0),
    )
}

/// `(γ₅ ⊗ m) ψ`: swaps upper and lower halves and applies `m` to each.
#[inline]
fn gamma5_times(m: &Mat2, psi: Spinor) -> Spinor {
    [
        m[(0, 0)] * psi[2] + m[(0, 1)] * psi[3],
        m[(1, 0)] * psi[2] + m[(1, 1)] * psi[3],
        m[(0, 0)] * psi[0] + m[(0, 1)] * psi[1],
        m[(1, 0)] * psi[0] + m[(1, 1)] * psi[1],
    ]
}

/// `α^a e^i_a = γ₅ ⊗ P_i` with `P_i = e^i_a σ_a`.
#[inline]
fn frame_clifford(e: &nalgebra::Matrix3<f64>, i: usize) -> Mat2 {
    pauli_dot([e[(i, 0)], e[(i, 1)], e[(i, 2)]])
}

fn check(u: &SpinorField, geo: &GeometryField) -> Result<()> {
    geo.check_grid(u.grid())
}

/// `hat[mode] *= f(kd[axis index of mode])` for every `n³` block.
fn scale_by_axis(spec: &Spectral, data: &mut [Complex64], axis: usize, f: impl Fn(f64) -> Complex64) {
    let n = spec.grid.n;
    let table: Vec<Complex64> = spec.derivative_wavenumbers().iter().map(|&k| f(k)).collect();
    for block in data.chunks_mut(n * n * n) {
        for (ix, plane) in block.chunks_mut(n * n).enumerate() {
            for (iy, line) in plane.chunks_mut(n).enumerate() {
                match axis {
                    0 => line.iter_mut().for_each(|z| *z *= table[ix]),
                    1 => line.iter_mut().for_each(|z| *z *= table[iy]),
                    _ => line.iter_mut().zip(&table).for_each(|(z, t)| *z *= t),
                }
            }
        }
    }
}

/// `∂_axis` of the 4-component spectrum `hat`, returned in physical space.
fn derivative_from_hat(spec: &Spectral, hat: &[Complex64], axis: usize) -> Vec<Complex64> {
    let mut out = hat.to_vec();
    scale_by_axis(spec, &mut out, axis, |k| IM * k);
    spec.inverse(&mut out);
    out
}

fn forward(spec: &Spectral, data: &[Complex64]) -> Vec<Complex64> {
    let mut hat = data.to_vec();
    spec.forward(&mut hat);
    hat
}

/// `Σ_i ∂_i w_i` for three stacked 4-component fields.
fn divergence(spec: &Spectral, w: [Vec<Complex64>; 3]) -> Vec<Complex64> {
    let mut acc: Option<Vec<Complex64>> = None;
    for (axis, mut comp) in w.into_iter().enumerate() {
        spec.forward(&mut comp);
        scale_by_axis(spec, &mut comp, axis, |k| IM * k);
        match acc.as_mut() {
            None => acc = Some(comp),
            Some(a) => a.iter_mut().zip(&comp).for_each(|(x, y)| *x += y),
        }
    }
    let mut acc = acc.expect("three components");
    spec.inverse(&mut acc);
    acc
}

/// Exact derivative of the trigonometric interpolant along `axis`.
pub fn spectral_derivative(u: &SpinorField, axis: usize) -> SpinorField {
    let spec = Spectral::for_grid(*u.grid());
    let hat = forward(&spec, u.data());
    SpinorField::from_raw(*u.grid(), derivative_from_hat(&spec, &hat, axis))
}

/// All three spectral first derivatives.
pub fn gradient(u: &SpinorField) -> [SpinorField; 3] {
    let spec = Spectral::for_grid(*u.grid());
    let hat = forward(&spec, u.data());
    std::array::from_fn(|axis| {
        SpinorField::from_raw(*u.grid(), derivative_from_hat(&spec, &hat, axis))
    })
}

/// Applies the Fourier multiplier `symbol(mode)` to every component.
pub fn apply_multiplier(u: &SpinorField, symbol: impl Fn(usize) -> Complex64) -> SpinorField {
    let spec = Spectral::for_grid(*u.grid());
    let n3 = u.grid().len();
    let mut hat = forward(&spec, u.data());
    let table: Vec<Complex64> = (0..n3).map(&symbol).collect();
    for block in hat.chunks_mut(n3) {
        for (z, s) in block.iter_mut().zip(&table) {
            *z *= s;
        }
    }
    spec.inverse(&mut hat);
    SpinorField::from_raw(*u.grid(), hat)
}

/// Fraction of the spectral energy on modes with `max|index| ≥ n/2 - 1`.
pub fn spectral_tail(u: &SpinorField) -> f64 {
    let spec = Spectral::for_grid(*u.grid());
    let n3 = u.grid().len();
    let cut = u.grid().n / 2 - 1;
    let hat = forward(&spec, u.data());
    let mut total = 0.0;
    let mut tail = 0.0;
    for block in hat.chunks(n3) {
        for (mode, z) in block.iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            if spec.mode_extent(mode) >= cut {
                tail += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

pub fn check_resolved(u: &SpinorField, threshold: f64) -> Result<f64> {
    let tail = spectral_tail(u);
    if tail > threshold {
        Err(Error::ResolutionError { tail, threshold })
    } else {
        Ok(tail)
    }
}

/// `⟨u, v⟩_{L²(M_h)} = Σ √det h · ū·v Δx³`.
pub fn inner_mh(u: &SpinorField, v: &SpinorField, geo: &GeometryField) -> Complex64 {
    let n3 = u.grid().len();
    let mut s = C0;
    for p in 0..n3 {
        let w = geo.node(p).sqrt_det;
        let mut local = C0;
        for c in 0..4 {
            local += u.data()[c * n3 + p].conj() * v.data()[c * n3 + p];
        }
        s += local * w;
    }
    s * u.grid().cell_volume()
}

pub fn norm_mh(u: &SpinorField, geo: &GeometryField) -> f64 {
    inner_mh(u, u, geo).re.max(0.0).sqrt()
}

/// `L²(M_h)` norm restricted to nodes with `|x| ≤ radius`.
pub fn norm_mh_within(u: &SpinorField, geo: &GeometryField, radius: f64) -> f64 {
    let grid = u.grid();
    let mut s = 0.0;
    for p in 0..grid.len() {
        let x = grid.point(p);
        if x.iter().map(|c| c * c).sum::<f64>() <= radius * radius {
            let v = u.node(p);
            s += v.iter().map(|z| z.norm_sqr()).sum::<f64>() * geo.node(p).sqrt_det;
        }
    }
    (s * grid.cell_volume()).sqrt()
}

/// `D_m u` in the skew-symmetric form
/// `-(i/2)[α^a e^i_a ∂_i u + g^{-1/2} ∂_i(g^{1/2} e^i_a α^a u)] + Z u - β m u`,
/// which equals `-i α^a e^i_a (∂_i + B_i) u - β m u` and is symmetric for the
/// discrete `L²(M_h)` inner product.
pub fn apply_dirac(u: &SpinorField, geo: &GeometryField, m: f64) -> Result<SpinorField> {
    check(u, geo)?;
    let grid = *u.grid();
    let n3 = grid.len();
    let spec = geo.spectral();
    let hat = forward(spec, u.data());
    let grad: [Vec<Complex64>; 3] = std::array::from_fn(|a| derivative_from_hat(spec, &hat, a));
    let mut flux: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![C0; 4 * n3]);
    for p in 0..n3 {
        let node = geo.node(p);
        let psi = u.node(p);
        for i in 0..3 {
            let w = scale_re(node.sqrt_det, gamma5_times(&frame_clifford(&node.e, i), psi));
            for c in 0..4 {
                flux[i][c * n3 + p] = w[c];
            }
        }
    }
    let div = divergence(spec, flux);
    let mut out = SpinorField::zeros(grid);
    let half_i = Complex64::new(0.0, -0.5);
    for p in 0..n3 {
        let node = geo.node(p);
        let psi = u.node(p);
        let mut acc = [C0; 4];
        for i in 0..3 {
            let d = [grad[i][p], grad[i][n3 + p], grad[i][2 * n3 + p], grad[i][3 * n3 + p]];
            acc = add(acc, gamma5_times(&frame_clifford(&node.e, i), d));
        }
        let dv = [div[p], div[n3 + p], div[2 * n3 + p], div[3 * n3 + p]];
        acc = add(acc, scale_re(1.0 / node.sqrt_det, dv));
        let mut v = scale(half_i, acc);
        v = add(v, gamma5_times(&node.dirac_potential, psi));
        v = add(v, scale_re(-m, beta(psi)));
        out.set_node(p, v);
    }
    Ok(out)
}

/// `D_m u = -i α^a e^i_a (∂_i u + B_i u) - β m u` evaluated literally.
pub fn apply_dirac_direct(u: &SpinorField, geo: &GeometryField, m: f64) -> Result<SpinorField> {
    check(u, geo)?;
    let grid = *u.grid();
    let grad = gradient(u);
    let mut out = SpinorField::zeros(grid);
    for p in 0..grid.len() {
        let node = geo.node(p);
        let psi = u.node(p);
        let mut acc = [C0; 4];
        for i in 0..3 {
            let cov = add(grad[i].node(p), node.b[i].apply(psi));
            acc = add(acc, gamma5_times(&frame_clifford(&node.e, i), cov));
        }
        let v = add(scale(-IM, acc), scale_re(-m, beta(psi)));
        out.set_node(p, v);
    }
    Ok(out)
}

/// Componentwise `(det h)^{-1/2} ∂_i((det h)^{1/2} h^{ij} ∂_j f)`.
pub fn scalar_laplace_beltrami(f: &SpinorField, geo: &GeometryField) -> Result<SpinorField> {
    check(f, geo)?;
    let grad = gradient(f);
    Ok(laplace_from_gradient(&grad, geo))
}

fn laplace_from_gradient(grad: &[SpinorField; 3], geo: &GeometryField) -> SpinorField {
    let grid = *grad[0].grid();
    let n3 = grid.len();
    let mut flux: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![C0; 4 * n3]);
    for p in 0..n3 {
        let node = geo.node(p);
        for c in 0..4 {
            let g = [
                grad[0].data()[c * n3 + p],
                grad[1].data()[c * n3 + p],
                grad[2].data()[c * n3 + p],
            ];
            for i in 0..3 {
                let v = node.h_inv[(i, 0)] * g[0] + node.h_inv[(i, 1)] * g[1] + node.h_inv[(i, 2)] * g[2];
                flux[i][c * n3 + p] = v * node.sqrt_det;
            }
        }
    }
    let mut div = divergence(geo.spectral(), flux);
    for c in 0..4 {
        for p in 0..n3 {
            div[c * n3 + p] /= geo.node(p).sqrt_det;
        }
    }
    SpinorField::from_raw(grid, div)
}

/// `Ω₁(u) = 2B^i ∂_i u` and `Ω₂ u`.
pub fn perturbation_terms(u: &SpinorField, geo: &GeometryField) -> Result<(SpinorField, SpinorField)> {
    check(u, geo)?;
    let grad = gradient(u);
    Ok(perturbation_from_gradient(u, &grad, geo))
}

fn perturbation_from_gradient(
    u: &SpinorField,
    grad: &[SpinorField; 3],
    geo: &GeometryField,
) -> (SpinorField, SpinorField) {
    let grid = *u.grid();
    let mut om1 = SpinorField::zeros(grid);
    let mut om2 = SpinorField::zeros(grid);
    for p in 0..grid.len() {
        let node = geo.node(p);
        let mut acc = [C0; 4];
        for i in 0..3 {
            acc = add(acc, node.b_up[i].apply(grad[i].node(p)));
        }
        om1.set_node(p, scale_re(2.0, acc));
        om2.set_node(p, node.omega2().apply(u.node(p)));
    }
    (om1, om2)
}

/// `K u = m²u - Δ̃_h u - Ω₁(u) - Ω₂u`, the right-hand side of `D_m² u`.
pub fn squared_operator(u: &SpinorField, geo: &GeometryField, m: f64) -> Result<SpinorField> {
    check(u, geo)?;
    let grad = gradient(u);
    let lap = laplace_from_gradient(&grad, geo);
    let (om1, om2) = perturbation_from_gradient(u, &grad, geo);
    let mut out = u.scaled(Complex64::new(m * m, 0.0));
    out.add_scaled(Complex64::new(-1.0, 0.0), &lap);
    out.add_scaled(Complex64::new(-1.0, 0.0), &om1);
    out.add_scaled(Complex64::new(-1.0, 0.0), &om2);
    Ok(out)
}

/// `m²u - Δ̃_h u`.
pub fn scalar_kg_operator(u: &SpinorField, geo: &GeometryField, m: f64) -> Result<SpinorField> {
    let lap = scalar_laplace_beltrami(u, geo)?;
    let mut out = u.scaled(Complex64::new(m * m, 0.0));
    out.add_scaled(Complex64::new(-1.0, 0.0), &lap);
    Ok(out)
}

/// Flat `‖(1 - Δ)u‖_{L²}`, the normaliser of the squaring residuals.
pub fn h2_proxy_norm(u: &SpinorField) -> f64 {
    let spec = Spectral::for_grid(*u.grid());
    apply_multiplier(u, |mode| Complex64::new(1.0 + spec.laplacian_symbol(mode), 0.0))
        .flat_norm_squared()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SquaringResidual {
    /// Against `m² - Δ_h + ¼R_h` with the spinorial Laplacian assembled
    /// from its covariant pieces.
    pub res1: f64,
    /// Against `m² - Δ̃_h - Ω₁ - Ω₂`.
    pub res2: f64,
    pub spectral_tail: f64,
    pub h2_norm: f64,
    /// Residuals are measured on `|x| ≤ radius`.
    pub radius: f64,
}

/// Residuals of the squaring identity, normalised by the `H²` proxy of `u`
/// and measured where the metric is untapered.
pub fn squaring_residual(u: &SpinorField, geo: &GeometryField, m: f64) -> Result<SquaringResidual> {
    check(u, geo)?;
    let spectral_tail = check_resolved(u, RESOLUTION_THRESHOLD)?;
    let grid = *u.grid();
    let du = apply_dirac(u, geo, m)?;
    let ddu = apply_dirac(&du, geo, m)?;
    let grad = gradient(u);
    let lap = laplace_from_gradient(&grad, geo);
    let (om1, om2) = perturbation_from_gradient(u, &grad, geo);

    // Δ_h u = Δ̃_h u + B^i∂_i u + D̃^i(B_i u) + B^iB_i u, with
    // D̃^i(B_i u) = (∂^iB_i - Γ^{k i}_{ i} B_k) u + B^i ∂_i u.
    let mut rhs1 = SpinorField::zeros(grid);
    let mut rhs2 = SpinorField::zeros(grid);
    let mm = Complex64::new(m * m, 0.0);
    for p in 0..grid.len() {
        let node = geo.node(p);
        let psi = u.node(p);
        let mut b_grad = [C0; 4];
        for i in 0..3 {
            b_grad = add(b_grad, node.b_up[i].apply(grad[i].node(p)));
        }
        let div_b = add(node.conn_div.apply(psi), b_grad);
        let spin_lap = add(add(lap.node(p), b_grad), add(div_b, node.conn_sq.apply(psi)));
        let v1 = add(
            add(scale(mm, psi), scale_re(-1.0, spin_lap)),
            scale_re(0.25 * node.scalar_curvature, psi),
        );
        rhs1.set_node(p, v1);
        let v2 = add(
            add(scale(mm, psi), scale_re(-1.0, lap.node(p))),
            scale_re(-1.0, add(om1.node(p), om2.node(p))),
        );
        rhs2.set_node(p, v2);
    }
    let radius = geo.untapered_radius().min(grid.half_width);
    let h2_norm = h2_proxy_norm(u);
    let norm = if h2_norm > 0.0 { h2_norm } else { 1.0 };
    Ok(SquaringResidual {
        res1: norm_mh_within(&ddu.sub(&rhs1), geo, radius) / norm,
        res2: norm_mh_within(&ddu.sub(&rhs2), geo, radius) / norm,
        spectral_tail,
        h2_norm,
        radius,
    })
}
