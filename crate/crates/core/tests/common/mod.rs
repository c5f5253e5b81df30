//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use asymflat::metric::{eval_metric, MetricParams};
use nalgebra::Matrix3;

/// 4th-order central difference of `f` along `axis` with step `h`.
fn central<F: Fn([f64; 3]) -> Matrix3<f64>>(f: &F, x: [f64; 3], axis: usize, h: f64) -> Matrix3<f64> {
    let at = |s: f64| {
        let mut y = x;
        y[axis] += s;
        f(y)
    };
    (at(-2.0 * h) - at(2.0 * h) + (at(h) - at(-h)) * 8.0) / (12.0 * h)
}

fn metric_only(params: &MetricParams) -> impl Fn([f64; 3]) -> Matrix3<f64> + '_ {
    move |x| eval_metric(params, x).unwrap().h
}

pub struct FdGeometry {
    pub gamma: [[[f64; 3]; 3]; 3],
    pub scalar_curvature: f64,
    /// Largest second derivative of `h`, the natural scale of `R_h`.
    pub curvature_scale: f64,
}

/// Christoffel symbols and scalar curvature from metric values only:
/// finite-difference jets, then the fully lowered Riemann tensor
/// `R_{ijkl} = ½(∂_j∂_k h_il + ∂_i∂_l h_jk - ∂_i∂_k h_jl - ∂_j∂_l h_ik)
///   + h_mn(Γ^m_jk Γ^n_il - Γ^m_jl Γ^n_ik)` contracted with `h^{ik}h^{jl}`.
pub fn fd_geometry(params: &MetricParams, x: [f64; 3]) -> FdGeometry {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    let step = 2e-3 * (1.0 + r);
    let h = metric_only(params);
    let hx = h(x);
    let hinv = hx.try_inverse().unwrap();
    let d1: [Matrix3<f64>; 3] = std::array::from_fn(|i| central(&h, x, i, step));
    let d2: [[Matrix3<f64>; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| central(&|y| central(&h, y, j, step), x, i, step))
    });
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                gamma[i][j][k] = (0..3)
                    .map(|l| 0.5 * hinv[(i, l)] * (d1[j][(l, k)] + d1[k][(j, l)] - d1[l][(j, k)]))
                    .sum();
            }
        }
    }
    let mut scalar = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut riem = 0.5
                        * (d2[j][k][(i, l)] + d2[i][l][(j, k)] - d2[i][k][(j, l)] - d2[j][l][(i, k)]);
                    for m in 0..3 {
                        for n in 0..3 {
                            riem += hx[(m, n)]
                                * (gamma[m][j][k] * gamma[n][i][l] - gamma[m][j][l] * gamma[n][i][k]);
                        }
                    }
                    scalar += hinv[(i, k)] * hinv[(j, l)] * riem;
                }
            }
        }
    }
    let curvature_scale = d2.iter().flatten().map(|m| m.amax()).fold(0.0, f64::max);
    FdGeometry {
        gamma,
        scalar_curvature: scalar,
        curvature_scale,
    }
}

/// Denman–Beavers iteration for the square root of an SPD matrix.
pub fn denman_beavers_sqrt(a: &Matrix3<f64>) -> Matrix3<f64> {
    let mut y = *a;
    let mut z = Matrix3::identity();
    for _ in 0..100 {
        let yi = y.try_inverse().unwrap();
        let zi = z.try_inverse().unwrap();
        let ny = (y + zi) * 0.5;
        z = (z + yi) * 0.5;
        let done = (ny - y).amax() <= 1e-15 * ny.amax();
        y = ny;
        if done {
            break;
        }
    }
    y
}

/// Seeded points with log-spaced radii in `[1e-2, r_max]`, origin excluded.
pub fn seeded_points(count: usize, r_max: f64, seed: u64) -> Vec<[f64; 3]> {
    asymflat::metric::log_radial_probes(count + 1, r_max, seed).split_off(1)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}
