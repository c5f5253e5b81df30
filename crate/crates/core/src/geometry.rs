//! Pointwise Riemannian and spin geometry of a metric sample.
//!
//! Index conventions: coordinate indices are raised and lowered with `h`,
//! frame indices with δ. The dreibein is stored as the symmetric matrix
//! `E` with `E[(i, a)] = e^i_a`, so `E² = h⁻¹`; its lowered form
//! `e_i^a = h_ik e^k_a` is `E⁻¹`.

use nalgebra::{Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{bracket, eval_metric, symmetric_eigen, eval_metric_tapered, DecayReport, MetricParams, MetricSample, Taper};
use crate::operators::gamma::{GammaSet, Spin};

/// `gamma[i][j][k] = Γ^i_{jk}`.
pub type Christoffel = [[[f64; 3]; 3]; 3];

/// `dgamma[l][i][j][k] = ∂_l Γ^i_{jk}`.
pub type ChristoffelDerivative = [Christoffel; 3];

/// `Γ^i_{jk} = ½ h^{il}(∂_j h_{lk} + ∂_k h_{jl} - ∂_l h_{jk})`.
pub fn christoffel(sample: &MetricSample) -> Christoffel {
    let lowered = lowered_christoffel(&sample.dh.d1);
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in j..3 {
                let v: f64 = (0..3).map(|l| sample.h_inv[(i, l)] * lowered[l][j][k]).sum();
                gamma[i][j][k] = v;
                gamma[i][k][j] = v;
            }
        }
    }
    gamma
}

/// `Γ_{ljk} = ½(∂_j h_{lk} + ∂_k h_{jl} - ∂_l h_{jk})` from first derivatives.
fn lowered_christoffel(d1: &[Matrix3<f64>; 3]) -> Christoffel {
    let mut out = [[[0.0; 3]; 3]; 3];
    for l in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[l][j][k] = 0.5 * (d1[j][(l, k)] + d1[k][(j, l)] - d1[l][(j, k)]);
            }
        }
    }
    out
}

/// Derivatives of the Christoffel symbols from the analytic second-order jet.
pub fn christoffel_derivative(sample: &MetricSample) -> ChristoffelDerivative {
    let lowered = lowered_christoffel(&sample.dh.d1);
    let hinv = &sample.h_inv;
    let mut out = [[[[0.0; 3]; 3]; 3]; 3];
    for m in 0..3 {
        let dhinv = -(hinv * sample.dh.d1[m] * hinv);
        let dlow = lowered_christoffel(&sample.dh.d2[m]);
        for i in 0..3 {
            for j in 0..3 {
                for k in j..3 {
                    let v: f64 = (0..3)
                        .map(|l| dhinv[(i, l)] * lowered[l][j][k] + hinv[(i, l)] * dlow[l][j][k])
                        .sum();
                    out[m][i][j][k] = v;
                    out[m][i][k][j] = v;
                }
            }
        }
    }
    out
}

/// `R = h^{jk}(∂_iΓ^i_{jk} - ∂_kΓ^i_{ji} + Γ^l_{jk}Γ^i_{il} - Γ^l_{ji}Γ^i_{kl})`.
pub fn scalar_curvature(
    sample: &MetricSample,
    gamma: &Christoffel,
    dgamma: &ChristoffelDerivative,
) -> f64 {
    let mut r = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            let mut ricci = 0.0;
            for i in 0..3 {
                ricci += dgamma[i][i][j][k] - dgamma[k][i][j][i];
                for l in 0..3 {
                    ricci += gamma[l][j][k] * gamma[i][i][l] - gamma[l][j][i] * gamma[i][k][l];
                }
            }
            r += sample.h_inv[(j, k)] * ricci;
        }
    }
    r
}

/// Symmetric dreibein `E = (h⁻¹)^{1/2}` with its first two derivative jets.
#[derive(Debug, Clone)]
pub struct Dreibein {
    pub e: Matrix3<f64>,
    pub e_inv: Matrix3<f64>,
    /// `de[i] = ∂_i E`.
    pub de: [Matrix3<f64>; 3],
    /// `d2e[i][j] = ∂_i∂_j E`.
    pub d2e: [[Matrix3<f64>; 3]; 3],
}

/// Solves `X E + E X = C` for symmetric positive definite `E = V diag(λ) Vᵀ`.
fn solve_sylvester(vecs: &Matrix3<f64>, lambda: &[f64; 3], c: &Matrix3<f64>) -> Matrix3<f64> {
    let ct = vecs.transpose() * c * vecs;
    let xt = Matrix3::from_fn(|p, q| ct[(p, q)] / (lambda[p] + lambda[q]));
    vecs * xt * vecs.transpose()
}

pub fn dreibein(sample: &MetricSample) -> Result<Dreibein> {
    let hinv = &sample.h_inv;
    let (v, vals) = symmetric_eigen(hinv);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 1e-12 {
        return Err(Error::SqrtFailure(min));
    }
    let lambda = vals.map(f64::sqrt);
    let e = v * Matrix3::from_diagonal(&lambda.into()) * v.transpose();
    let e = 0.5 * (e + e.transpose());
    let e_inv = v * Matrix3::from_diagonal(&lambda.map(|l| 1.0 / l).into()) * v.transpose();
    let e_inv = 0.5 * (e_inv + e_inv.transpose());

    let d1 = &sample.dh.d1;
    let dhinv: [Matrix3<f64>; 3] = std::array::from_fn(|i| -(hinv * d1[i] * hinv));
    let de: [Matrix3<f64>; 3] = std::array::from_fn(|i| solve_sylvester(&v, &lambda, &dhinv[i]));
    let d2e = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let d2hinv = hinv * d1[i] * hinv * d1[j] * hinv + hinv * d1[j] * hinv * d1[i] * hinv
                - hinv * sample.dh.d2[i][j] * hinv;
            let rhs = d2hinv - de[i] * de[j] - de[j] * de[i];
            solve_sylvester(&v, &lambda, &rhs)
        })
    });
    Ok(Dreibein { e, e_inv, de, d2e })
}

/// `(Γ_j)_{kl} = Γ^k_{jl}`.
fn gamma_slice(gamma: &Christoffel, j: usize) -> Matrix3<f64> {
    Matrix3::from_fn(|k, l| gamma[k][j][l])
}

/// `omega[j][(a, b)] = ω_j^{ab} = e_i^a (∂_j e^i_b + Γ^i_{jk} e^k_b)`.
pub fn spin_connection(frame: &Dreibein, gamma: &Christoffel) -> [Matrix3<f64>; 3] {
    std::array::from_fn(|j| frame.e_inv * (frame.de[j] + gamma_slice(gamma, j) * frame.e))
}

/// `domega[i][j] = ∂_i ω_j`.
pub fn spin_connection_derivative(
    frame: &Dreibein,
    gamma: &Christoffel,
    dgamma: &ChristoffelDerivative,
) -> [[Matrix3<f64>; 3]; 3] {
    std::array::from_fn(|i| {
        let de_inv = -(frame.e_inv * frame.de[i] * frame.e_inv);
        std::array::from_fn(|j| {
            let g = gamma_slice(gamma, j);
            let dg = gamma_slice(&dgamma[i], j);
            de_inv * (frame.de[j] + g * frame.e)
                + frame.e_inv * (frame.d2e[i][j] + dg * frame.e + g * frame.de[i])
        })
    })
}

/// Largest violation of `ω_j^{ab} = -ω_j^{ba}`.
pub fn antisymmetry_defect(omega: &[Matrix3<f64>; 3]) -> f64 {
    omega
        .iter()
        .map(|w| (w + w.transpose()).amax())
        .fold(0.0, f64::max)
}

/// `B_j = ⅛ ω_j^{ab} [α_a, α_b]` and `dB[i][j] = ∂_i B_j`.
///
/// With `γ^a = βα_a` this is `-⅛ ω_j^{ab} [γ_a, γ_b]`; this sign makes
/// `[B_j, α_d] = ω_j^{cd} α_c`, i.e. the spinor connection is compatible
/// with Clifford multiplication by the frame.
pub fn connection_b(
    omega: &[Matrix3<f64>; 3],
    domega: &[[Matrix3<f64>; 3]; 3],
    gammas: &GammaSet,
) -> ([Spin; 3], [[Spin; 3]; 3]) {
    let comm: [[Spin; 3]; 3] =
        std::array::from_fn(|a| std::array::from_fn(|b| gammas.alpha_commutator(a, b)));
    let contract = |w: &Matrix3<f64>| {
        let mut m = Spin::zeros();
        for a in 0..3 {
            for b in 0..3 {
                if a != b && w[(a, b)] != 0.0 {
                    m += comm[a][b] * Complex64::new(0.125 * w[(a, b)], 0.0);
                }
            }
        }
        m
    };
    let b = std::array::from_fn(|j| contract(&omega[j]));
    let db = std::array::from_fn(|i| std::array::from_fn(|j| contract(&domega[i][j])));
    (b, db)
}

/// Operator (spectral) norm of a 4×4 complex matrix.
pub fn spin_op_norm(m: &Spin) -> f64 {
    let eig = SymmetricEigen::new(m.adjoint() * m);
    eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(*v)).max(0.0).sqrt()
}

/// All pointwise geometric data entering the Dirac operator.
#[derive(Debug, Clone)]
pub struct GeometryAtPoint {
    pub sample: MetricSample,
    pub christoffel: Christoffel,
    pub christoffel_derivative: ChristoffelDerivative,
    pub scalar_curvature: f64,
    pub frame: Dreibein,
    pub omega: [Matrix3<f64>; 3],
    pub domega: [[Matrix3<f64>; 3]; 3],
    pub b: [Spin; 3],
    pub db: [[Spin; 3]; 3],
    pub omega_antisymmetry_defect: f64,
}

impl GeometryAtPoint {
    pub fn from_sample(sample: MetricSample, gammas: &GammaSet) -> Result<Self> {
        let christoffel = christoffel(&sample);
        let christoffel_derivative = christoffel_derivative(&sample);
        let scalar_curvature = scalar_curvature(&sample, &christoffel, &christoffel_derivative);
        let frame = dreibein(&sample)?;
        let omega = spin_connection(&frame, &christoffel);
        let domega = spin_connection_derivative(&frame, &christoffel, &christoffel_derivative);
        let (b, db) = connection_b(&omega, &domega, gammas);
        Ok(Self {
            omega_antisymmetry_defect: antisymmetry_defect(&omega),
            sample,
            christoffel,
            christoffel_derivative,
            scalar_curvature,
            frame,
            omega,
            domega,
            b,
            db,
        })
    }

    /// `B^i = h^{ij} B_j`.
    pub fn b_up(&self) -> [Spin; 3] {
        let hinv = &self.sample.h_inv;
        std::array::from_fn(|i| {
            (0..3).fold(Spin::zeros(), |acc, j| acc + self.b[j] * Complex64::new(hinv[(i, j)], 0.0))
        })
    }

    /// `Γ^{k i}_{\;i} = h^{ij} Γ^k_{ij}`.
    pub fn christoffel_trace(&self) -> [f64; 3] {
        let hinv = &self.sample.h_inv;
        std::array::from_fn(|k| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += hinv[(i, j)] * self.christoffel[k][i][j];
                }
            }
            s
        })
    }

    /// `∂^i B_i - Γ^{k i}_{\;i} B_k`, the zeroth-order part of `D̃^i(B_i ·)`.
    pub fn connection_divergence(&self) -> Spin {
        let hinv = &self.sample.h_inv;
        let trace = self.christoffel_trace();
        let mut m = Spin::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m += self.db[j][i] * Complex64::new(hinv[(i, j)], 0.0);
            }
        }
        for k in 0..3 {
            m -= self.b[k] * Complex64::new(trace[k], 0.0);
        }
        m
    }

    /// `B^i B_i`.
    pub fn connection_square(&self) -> Spin {
        let up = self.b_up();
        (0..3).fold(Spin::zeros(), |acc, i| acc + up[i] * self.b[i])
    }

    /// `Ω₂ = ∂^iB_i + B^iB_i - Γ^{j i}_{\;i}B_j - ¼R_h`.
    pub fn omega2(&self) -> Spin {
        self.connection_divergence() + self.connection_square()
            - Spin::identity() * Complex64::new(0.25 * self.scalar_curvature, 0.0)
    }

    pub fn max_b_norm(&self) -> f64 {
        self.b.iter().map(spin_op_norm).fold(0.0, f64::max)
    }

    pub fn max_db_norm(&self) -> f64 {
        self.db.iter().flatten().map(spin_op_norm).fold(0.0, f64::max)
    }

    pub fn max_christoffel(&self) -> f64 {
        self.christoffel
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn geometry_at(
    params: &MetricParams,
    taper: Option<&Taper>,
    x: [f64; 3],
    gammas: &GammaSet,
) -> Result<GeometryAtPoint> {
    GeometryAtPoint::from_sample(eval_metric_tapered(params, taper, x)?, gammas)
}

pub const GEOMETRY_DECAY_NAMES: [&str; 4] = ["B", "dB", "R_h", "Gamma"];

/// Weighted sups `⟨x⟩^{2+σ}|B|`, `⟨x⟩^{3+σ}|∂B|`, `⟨x⟩^{3+σ}|R_h|`,
/// `⟨x⟩^{2+σ}|Γ|` over the probes (untapered family).
pub fn geometry_decay_report(params: &MetricParams, probes: &[[f64; 3]]) -> Result<DecayReport> {
    geometry_decay_report_with_threshold(params, probes, crate::metric::DEFAULT_DECAY_THRESHOLD)
}

pub fn geometry_decay_report_with_threshold(
    params: &MetricParams,
    probes: &[[f64; 3]],
    threshold: f64,
) -> Result<DecayReport> {
    let gammas = crate::operators::gamma::build_gammas();
    let sigma = params.decay_sigma;
    let mut sups = [0.0f64; 4];
    for &x in probes {
        let geo = GeometryAtPoint::from_sample(eval_metric(params, x)?, &gammas)?;
        let w = bracket(x);
        let values = [
            geo.max_b_norm() * w.powf(2.0 + sigma),
            geo.max_db_norm() * w.powf(3.0 + sigma),
            geo.scalar_curvature.abs() * w.powf(3.0 + sigma),
            geo.max_christoffel() * w.powf(2.0 + sigma),
        ];
        for (s, v) in sups.iter_mut().zip(values) {
            *s = s.max(v);
        }
    }
    let mut report = DecayReport::default();
    let weights = [2.0 + sigma, 3.0 + sigma, 3.0 + sigma, 2.0 + sigma];
    for ((name, w), sup) in GEOMETRY_DECAY_NAMES.iter().zip(weights).zip(sups) {
        report.push(name, w, sup, threshold);
    }
    Ok(report)
}

/// Per-family summary used by reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DreibeinAudit {
    pub probes: usize,
    pub max_square_error: f64,
    pub max_antisymmetry_defect: f64,
    pub max_anti_hermitian_defect: f64,
}

/// Checks `E·E = h⁻¹`, ω antisymmetry and B anti-Hermiticity on probes.
pub fn audit_dreibein(params: &MetricParams, probes: &[[f64; 3]]) -> Result<DreibeinAudit> {
    let gammas = crate::operators::gamma::build_gammas();
    let mut audit = DreibeinAudit {
        probes: probes.len(),
        max_square_error: 0.0,
        max_antisymmetry_defect: 0.0,
        max_anti_hermitian_defect: 0.0,
    };
    for &x in probes {
        let geo = GeometryAtPoint::from_sample(eval_metric(params, x)?, &gammas)?;
        let sq = (geo.frame.e * geo.frame.e - geo.sample.h_inv).norm();
        audit.max_square_error = audit.max_square_error.max(sq);
        audit.max_antisymmetry_defect = audit.max_antisymmetry_defect.max(geo.omega_antisymmetry_defect);
        for b in &geo.b {
            let d = (b + b.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            audit.max_anti_hermitian_defect = audit.max_anti_hermitian_defect.max(d);
        }
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::log_radial_probes;
    use crate::operators::gamma::build_gammas;

    fn at(params: &MetricParams, x: [f64; 3]) -> GeometryAtPoint {
        geometry_at(params, None, x, &build_gammas()).unwrap()
    }

    #[test]
    fn flat_geometry_vanishes() {
        let g = at(&MetricParams::flat(), [0.3, 1.0, -2.0]);
        assert_eq!(g.max_christoffel(), 0.0);
        assert_eq!(g.scalar_curvature, 0.0);
        assert_eq!(g.frame.e, Matrix3::identity());
        assert!(g.frame.de.iter().all(|m| m.amax() == 0.0));
        assert!(g.omega.iter().all(|m| m.amax() == 0.0));
        assert!(g.b.iter().all(|m| m.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn zero_amplitude_families_are_flat() {
        for params in [MetricParams::conformal(0.0), MetricParams::off_diagonal(0.0)] {
            let g = at(&params, [0.5, -0.2, 0.1]);
            assert_eq!(g.max_christoffel(), 0.0);
            assert_eq!(g.scalar_curvature, 0.0);
            assert_eq!(g.max_b_norm(), 0.0);
        }
    }

    fn constant_sample(h: Matrix3<f64>) -> MetricSample {
        let h_inv = h.try_inverse().unwrap();
        let z = Matrix3::zeros();
        MetricSample {
            x: [0.0; 3],
            h,
            h_inv,
            det_h: h.determinant(),
            dh: crate::metric::MetricJet {
                d1: [z; 3],
                d2: [[z; 3]; 3],
                d3: [[[z; 3]; 3]; 3],
            },
        }
    }

    #[test]
    fn constant_metric_has_no_connection() {
        let h = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0);
        let g = GeometryAtPoint::from_sample(constant_sample(h), &build_gammas()).unwrap();
        assert_eq!(g.max_christoffel(), 0.0);
        assert!(g.omega.iter().all(|m| m.amax() == 0.0));
        assert_eq!(g.max_b_norm(), 0.0);
    }

    #[test]
    fn diagonal_square_root() {
        let h = Matrix3::from_diagonal(&nalgebra::Vector3::new(0.25, 1.0, 1.0));
        let frame = dreibein(&constant_sample(h)).unwrap();
        let expected = Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, 1.0, 1.0));
        assert!((frame.e - expected).amax() < 1e-14);
    }

    #[test]
    fn conformal_christoffel_matches_closed_form() {
        let params = MetricParams::conformal(0.1);
        let x = [1.0, 0.0, 0.0];
        let g = at(&params, x);
        // ∂_k φ for φ = A(1+|x|²)^{-3/4}
        let r2 = 1.0;
        let dphi: [f64; 3] = std::array::from_fn(|k| 0.1 * -0.75 * (1.0 + r2 as f64).powf(-1.75) * 2.0 * x[k]);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                    let expected = d(i, j) * dphi[k] + d(i, k) * dphi[j] - d(j, k) * dphi[i];
                    let got = g.christoffel[i][j][k];
                    assert!((got - expected).abs() <= 1e-10 * expected.abs().max(1e-300), "{i}{j}{k}");
                }
            }
        }
    }

    #[test]
    fn conformal_scalar_curvature_matches_closed_form() {
        // R = -e^{-2φ}(4Δφ + 2|∇φ|²) in three dimensions
        let params = MetricParams::conformal(0.1);
        let x = [1.0, 1.0, 0.0];
        let g = at(&params, x);
        let q: f64 = x.iter().map(|v| v * v).sum();
        let a = 0.1;
        let phi = a * (1.0 + q).powf(-0.75);
        let f1 = -0.75 * a * (1.0 + q).powf(-1.75);
        let f2 = 0.75 * 1.75 * a * (1.0 + q).powf(-2.75);
        let lap = 4.0 * f2 * q + 6.0 * f1;
        let grad2 = 4.0 * f1 * f1 * q;
        let expected = -(-2.0 * phi).exp() * (4.0 * lap + 2.0 * grad2);
        assert!(((g.scalar_curvature - expected) / expected).abs() < 1e-10);
    }

    #[test]
    fn spin_connection_is_antisymmetric_and_b_anti_hermitian() {
        for params in [MetricParams::conformal(0.1), MetricParams::off_diagonal(0.1)] {
            let audit = audit_dreibein(&params, &log_radial_probes(300, 1e3, 5)).unwrap();
            assert!(audit.max_square_error < 1e-10);
            assert!(audit.max_antisymmetry_defect < 1e-8);
            assert!(audit.max_anti_hermitian_defect < 1e-10);
        }
    }

    #[test]
    fn connection_is_compatible_with_clifford_multiplication() {
        let gammas = build_gammas();
        let g = at(&MetricParams::off_diagonal(0.1), [0.4, 0.7, -0.3]);
        for j in 0..3 {
            for d in 0..3 {
                let lhs = g.b[j] * gammas.alpha[d] - gammas.alpha[d] * g.b[j];
                let rhs = (0..3).fold(Spin::zeros(), |acc, c| {
                    acc + gammas.alpha[c] * Complex64::new(g.omega[j][(c, d)], 0.0)
                });
                let err = (lhs - rhs).iter().fold(0.0f64, |m, z| m.max(z.norm()));
                assert!(err < 1e-14, "j={j} d={d} err={err}");
            }
        }
    }

    #[test]
    fn db_matches_finite_differences_of_b() {
        let gammas = build_gammas();
        let step = 1e-3;
        for params in [MetricParams::conformal(0.1), MetricParams::off_diagonal(0.1)] {
            let x = [0.8, -0.5, 0.3];
            let g = geometry_at(&params, None, x, &gammas).unwrap();
            for i in 0..3 {
                let shifted = |s: f64| {
                    let mut y = x;
                    y[i] += s;
                    geometry_at(&params, None, y, &gammas).unwrap()
                };
                let (p2, p1, m1, m2) = (shifted(2.0 * step), shifted(step), shifted(-step), shifted(-2.0 * step));
                for j in 0..3 {
                    let fd = (-p2.b[j] + p1.b[j] * Complex64::new(8.0, 0.0) - m1.b[j] * Complex64::new(8.0, 0.0) + m2.b[j])
                        / Complex64::new(12.0 * step, 0.0);
                    let exact = g.db[i][j];
                    let scale = exact.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                    let err = (fd - exact).iter().fold(0.0f64, |m, z| m.max(z.norm()));
                    assert!(err <= 1e-5 * scale.max(1e-12), "i={i} j={j} err={err} scale={scale}");
                }
            }
        }
    }

    #[test]
    fn off_diagonal_connection_is_linear_to_first_order() {
        let x = [0.7, 0.2, -0.4];
        let a = 0.01;
        let g1 = at(&MetricParams::off_diagonal(a), x);
        let g2 = at(&MetricParams::off_diagonal(2.0 * a), x);
        let mut worst: f64 = 0.0;
        for j in 0..3 {
            let d = (g2.omega[j] - g1.omega[j] * 2.0).amax();
            worst = worst.max(d / (a * a));
        }
        assert!(worst.is_finite() && worst < 10.0);
    }

    #[test]
    fn decay_reports() {
        let probes = log_radial_probes(400, 1e3, 7);
        let flat = geometry_decay_report(&MetricParams::flat(), &probes).unwrap();
        assert!(flat.entries.iter().all(|e| e.sup == 0.0));
        let full = geometry_decay_report(&MetricParams::conformal(0.1), &probes).unwrap();
        let half = geometry_decay_report(&MetricParams::conformal(0.05), &probes).unwrap();
        for (f, h) in full.entries.iter().zip(&half.entries) {
            assert!(f.sup.is_finite() && f.sup > 0.0);
            // reduction factor under halving A is 2 within 10%
            let factor = f.sup / h.sup;
            assert!((factor - 2.0).abs() <= 0.2, "{} factor {factor}", f.name);
        }
        let off = geometry_decay_report(&MetricParams::off_diagonal(0.1), &probes).unwrap();
        assert!(off.entries.iter().all(|e| e.sup.is_finite()));
    }
}
