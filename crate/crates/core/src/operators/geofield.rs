//! Geometry sampled on the grid: the tapered metric family evaluated at
//! every node and reduced to what the grid operators consume.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;
use rayon::prelude::*;

use super::field::SpinRotation;
use super::gamma::build_gammas;
use super::grid::{Grid, Spectral};
use crate::error::{Error, Result};
use crate::geometry::GeometryAtPoint;
use crate::metric::{eval_metric_tapered, MetricParams, Taper};

#[derive(Debug, Clone, Copy)]
pub struct NodeGeometry {
    pub sqrt_det: f64,
    pub h_inv: Matrix3<f64>,
    /// Dreibein, `e[(i, a)] = e^i_a`.
    pub e: Matrix3<f64>,
    pub b: [SpinRotation; 3],
    /// `B^i = h^{ij} B_j`.
    pub b_up: [SpinRotation; 3],
    /// `∂^iB_i - Γ^{k i}_{\;i} B_k`.
    pub conn_div: SpinRotation,
    /// `B^i B_i`.
    pub conn_sq: SpinRotation,
    pub scalar_curvature: f64,
    /// `(det h)^{-1/2} ∂_i((det h)^{1/2} e^i_a)`.
    pub frame_div: [f64; 3],
    /// Zeroth-order part of the skew-symmetric Dirac form,
    /// `-i α^a e^i_a B_i + (i/2) frame_div_a α^a`, which equals
    /// `γ₅ ⊗ z` with `γ₅ = [[0, I], [I, 0]]`; `z` is stored.
    pub dirac_potential: Matrix2<Complex64>,
    /// Node lies where the taper modifies the metric.
    pub tapered: bool,
}

impl NodeGeometry {
    fn flat() -> Self {
        Self {
            sqrt_det: 1.0,
            h_inv: Matrix3::identity(),
            e: Matrix3::identity(),
            b: [SpinRotation::zero(); 3],
            b_up: [SpinRotation::zero(); 3],
            conn_div: SpinRotation::zero(),
            conn_sq: SpinRotation::zero(),
            scalar_curvature: 0.0,
            frame_div: [0.0; 3],
            dirac_potential: Matrix2::zeros(),
            tapered: false,
        }
    }

    /// `Ω₂ = ∂^iB_i + B^iB_i - Γ^{j i}_{\;i}B_j - ¼R_h`.
    pub fn omega2(&self) -> SpinRotation {
        let mut m = self.conn_div.add(&self.conn_sq);
        m.scalar -= 0.25 * self.scalar_curvature;
        m
    }
}

/// Per-node geometry of a (tapered) metric family on a grid.
pub struct GeometryField {
    grid: Grid,
    params: MetricParams,
    taper: Option<Taper>,
    nodes: Vec<NodeGeometry>,
    spectral: Arc<Spectral>,
    /// Largest residual of projecting the spin terms onto the even algebra.
    pub projection_residual: f64,
    /// Largest `|ω_j^{ab} + ω_j^{ba}|` over the grid.
    pub antisymmetry_defect: f64,
    /// Sup over nodes of the operator norm of the dreibein.
    pub max_frame_norm: f64,
    /// Largest `|z - z†|` of the Dirac potential; vanishes when the spin
    /// connection is compatible with Clifford multiplication.
    pub hermiticity_defect: f64,
}

impl std::fmt::Debug for GeometryField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeometryField")
            .field("grid", &self.grid)
            .field("params", &self.params)
            .field("taper", &self.taper)
            .finish_non_exhaustive()
    }
}

/// Taper for `params` on `grid`: starts at the cutoff radius and reaches
/// zero at `L - 2Δx`.
pub fn grid_taper(grid: &Grid, params: &MetricParams) -> Result<Taper> {
    let outer = grid.half_width - 2.0 * grid.spacing();
    Taper::new(params.cutoff_radius, outer)
}

impl GeometryField {
    pub fn flat(grid: Grid) -> Self {
        Self {
            grid,
            params: MetricParams::flat(),
            taper: None,
            nodes: vec![NodeGeometry::flat(); grid.len()],
            spectral: Spectral::for_grid(grid),
            projection_residual: 0.0,
            antisymmetry_defect: 0.0,
            max_frame_norm: 1.0,
            hermiticity_defect: 0.0,
        }
    }

    pub fn new(grid: Grid, params: &MetricParams) -> Result<Self> {
        params.validate()?;
        if params.is_flat() {
            let mut g = Self::flat(grid);
            g.params = *params;
            return Ok(g);
        }
        let taper = grid_taper(&grid, params)?;
        let gammas = build_gammas();
        let built: Vec<Result<(NodeGeometry, f64, f64)>> = (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let x = grid.point(p);
                let geo = GeometryAtPoint::from_sample(
                    eval_metric_tapered(params, Some(&taper), x)?,
                    &gammas,
                )?;
                let mut residual = 0.0f64;
                let mut proj = |m: &super::gamma::Spin| {
                    let (r, res) = SpinRotation::project(m, &gammas.spin);
                    residual = residual.max(res);
                    r
                };
                let b = std::array::from_fn(|j| proj(&geo.b[j]));
                let up = geo.b_up();
                let b_up = std::array::from_fn(|j| proj(&up[j]));
                let conn_div = proj(&geo.connection_divergence());
                let conn_sq = proj(&geo.connection_square());
                let hinv = geo.sample.h_inv;
                let e = geo.frame.e;
                // ∂_i log √det h = ½ tr(h⁻¹ ∂_i h)
                let dlog: [f64; 3] =
                    std::array::from_fn(|i| 0.5 * (hinv * geo.sample.dh.d1[i]).trace());
                let frame_div = std::array::from_fn(|a| {
                    (0..3)
                        .map(|i| dlog[i] * e[(i, a)] + geo.frame.de[i][(i, a)])
                        .sum()
                });
                let i = Complex64::new(0.0, 1.0);
                let mut zfull = super::gamma::Spin::zeros();
                for a in 0..3 {
                    let mut inner = geo.b[0] * Complex64::new(e[(0, a)], 0.0);
                    inner += geo.b[1] * Complex64::new(e[(1, a)], 0.0);
                    inner += geo.b[2] * Complex64::new(e[(2, a)], 0.0);
                    zfull += gammas.alpha[a] * inner * (-i);
                    zfull += gammas.alpha[a] * (i * 0.5 * frame_div[a]);
                }
                let z: Matrix2<Complex64> = zfull.fixed_view::<2, 2>(0, 2).into();
                let lower: Matrix2<Complex64> = zfull.fixed_view::<2, 2>(2, 0).into();
                let mut off = (lower - z).iter().fold(0.0f64, |m, v| m.max(v.norm()));
                for (r, c) in [(0, 0), (2, 2)] {
                    off = zfull.fixed_view::<2, 2>(r, c).iter().fold(off, |m, v| m.max(v.norm()));
                }
                residual = residual.max(off);
                let node = NodeGeometry {
                    sqrt_det: geo.sample.det_h.sqrt(),
                    h_inv: hinv,
                    e,
                    b,
                    b_up,
                    conn_div,
                    conn_sq,
                    scalar_curvature: geo.scalar_curvature,
                    frame_div,
                    dirac_potential: z,
                    tapered: taper.is_active(x),
                };
                Ok((node, residual, geo.omega_antisymmetry_defect))
            })
            .collect();
        let mut nodes = Vec::with_capacity(grid.len());
        let mut projection_residual = 0.0f64;
        let mut antisymmetry_defect = 0.0f64;
        let mut max_frame_norm = 0.0f64;
        let mut hermiticity_defect = 0.0f64;
        for item in built {
            let (node, res, defect) = item?;
            let z = node.dirac_potential;
            hermiticity_defect = hermiticity_defect
                .max((z - z.adjoint()).iter().fold(0.0f64, |m, v| m.max(v.norm())));
            projection_residual = projection_residual.max(res);
            antisymmetry_defect = antisymmetry_defect.max(defect);
            max_frame_norm =
                max_frame_norm.max(nalgebra::SymmetricEigen::new(node.e).eigenvalues.amax());
            nodes.push(node);
        }
        Ok(Self {
            grid,
            params: *params,
            taper: Some(taper),
            nodes,
            spectral: Spectral::for_grid(grid),
            projection_residual,
            antisymmetry_defect,
            max_frame_norm,
            hermiticity_defect,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &MetricParams {
        &self.params
    }

    pub fn taper(&self) -> Option<&Taper> {
        self.taper.as_ref()
    }

    pub fn is_flat(&self) -> bool {
        self.params.is_flat()
    }

    pub fn nodes(&self) -> &[NodeGeometry] {
        &self.nodes
    }

    pub fn node(&self, p: usize) -> &NodeGeometry {
        &self.nodes[p]
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if *grid == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Radius inside which the metric equals the analytic family.
    pub fn untapered_radius(&self) -> f64 {
        self.taper.map_or(f64::INFINITY, |t| t.inner)
    }
}
