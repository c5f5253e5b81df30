//! Time evolution of the Dirac flow `e^{itD_m}`, the squared (spinorial
//! Klein–Gordon) system and the scalar wave/Klein–Gordon flow, with exact
//! Fourier-multiplier propagators for the flat case.
//!
//! Flows are integrated with classical RK4. Observers see every step, so
//! time-integrated functionals can be accumulated without keeping the
//! whole trajectory in memory.

use nalgebra::Vector4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::dirac::{apply_dirac, apply_multiplier, inner_mh, norm_mh, scalar_kg_operator, squared_operator};
use crate::operators::field::{SpinorField, IM};
use crate::operators::gamma::build_gammas;
use crate::operators::geofield::GeometryField;

pub const DEFAULT_CFL: f64 = 0.5;

/// Relative amplitude below which a node counts as outside the support.
pub const SUPPORT_TOLERANCE: f64 = 1e-6;

/// Fraction of the free distance to the box edge a signal may travel.
pub const WRAPAROUND_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Dirac,
    Squared,
    ScalarWave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub cfl: f64,
    /// Disable for periodic data, where wrap-around is intended.
    pub check_wraparound: bool,
    /// Keep every `keep_stride`-th state; 0 keeps only the endpoints.
    pub keep_stride: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            cfl: DEFAULT_CFL,
            check_wraparound: true,
            keep_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: f64,
    /// `‖u(t)‖_{L²(M_h)}`.
    pub norm: f64,
    /// `‖∂_t u‖² + ⟨K u, u⟩` for second-order flows.
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub kind: FlowKind,
    pub integrator: String,
    pub dt: f64,
    pub steps: usize,
    pub mass: f64,
    pub keep_stride: usize,
    pub log: Vec<StepLog>,
}

impl TrajectoryMeta {
    /// `max_t |‖u(t)‖/‖u(0)‖ - 1|`.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.log.first().map_or(0.0, |l| l.norm);
        if n0 == 0.0 {
            return 0.0;
        }
        self.log.iter().map(|l| (l.norm / n0 - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `max_t |E(t)/E(0) - 1|`, zero when no energy was logged.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.log.first().and_then(|l| l.energy).unwrap_or(0.0);
        if e0 == 0.0 {
            return 0.0;
        }
        self.log
            .iter()
            .filter_map(|l| l.energy)
            .map(|e| (e / e0 - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Time-stamped states of one flow.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpinorField>,
    /// `∂_t u` for second-order flows.
    pub velocities: Option<Vec<SpinorField>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn final_state(&self) -> &SpinorField {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Largest `|x|` where `|u| > tol · max|u|`.
pub fn support_radius(u: &SpinorField, tol: f64) -> f64 {
    let peak = u.max_abs();
    if peak == 0.0 {
        return 0.0;
    }
    let grid = u.grid();
    (0..grid.len())
        .filter(|&p| crate::operators::field::spinor_norm(&u.node(p)) > tol * peak)
        .map(|p| grid.point(p).iter().map(|c| c * c).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `0.8 (L - support radius of u0)`. Velocities are not included: data
/// such as `√(m² - Δ)u0` carry nonlocal tails far below the signal.
pub fn wraparound_cap(u0: &SpinorField) -> f64 {
    WRAPAROUND_FRACTION * (u0.grid().half_width - support_radius(u0, SUPPORT_TOLERANCE))
}

/// `cfl · Δx / sup|e|`.
pub fn max_stable_dt(geo: &GeometryField, cfl: f64) -> f64 {
    cfl * geo.grid().spacing() / geo.max_frame_norm
}

/// Uniform steps covering `[0, t_final]` with step magnitude at most `|dt|`.
fn time_steps(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt.is_finite() && t_final.is_finite()) || dt == 0.0 {
        return Err(Error::Config(format!("invalid time step {dt} or final time {t_final}")));
    }
    if t_final == 0.0 {
        return Ok((0, dt));
    }
    if t_final.signum() != dt.signum() {
        return Err(Error::Config("time step and final time have opposite signs".into()));
    }
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, t_final / steps as f64))
}

fn preflight(
    geo: &GeometryField,
    data: &[&SpinorField],
    t_final: f64,
    dt: f64,
    opts: &EvolveOptions,
) -> Result<(usize, f64)> {
    for f in data {
        geo.check_grid(f.grid())?;
    }
    let max_dt = max_stable_dt(geo, opts.cfl);
    if dt.abs() > max_dt {
        return Err(Error::CflViolation { dt: dt.abs(), max_dt });
    }
    if opts.check_wraparound {
        let cap = wraparound_cap(data[0]);
        if t_final.abs() > cap {
            return Err(Error::WraparoundRisk { t_final: t_final.abs(), cap });
        }
    }
    time_steps(t_final, dt)
}

/// Callback receiving `(step, t, u, ∂_t u)` for every step including 0.
pub type Observer<'a> = dyn FnMut(usize, f64, &SpinorField, &SpinorField) + 'a;

/// Wraps `sink` so that it also receives `substeps - 1` states between
/// consecutive steps, by cubic Hermite interpolation of `(u, ∂_t u)`.
/// The interpolation error is `O(dt⁴)`, the order of the stepper.
pub fn dense_output<'a>(
    substeps: usize,
    mut sink: impl FnMut(f64, &SpinorField) + 'a,
) -> impl FnMut(usize, f64, &SpinorField, &SpinorField) + 'a {
    let substeps = substeps.max(1);
    let mut prev: Option<(f64, SpinorField, SpinorField)> = None;
    move |_, t, u, v| {
        if let Some((t0, u0, v0)) = prev.as_ref() {
            let h = t - t0;
            for j in 1..substeps {
                let th = j as f64 / substeps as f64;
                let (th2, th3) = (th * th, th * th * th);
                let c = |x: f64| Complex64::new(x, 0.0);
                let mut w = u0.scaled(c(2.0 * th3 - 3.0 * th2 + 1.0));
                w.add_scaled(c(h * (th3 - 2.0 * th2 + th)), v0);
                w.add_scaled(c(-2.0 * th3 + 3.0 * th2), u);
                w.add_scaled(c(h * (th3 - th2)), v);
                sink(t0 + th * h, &w);
            }
        }
        sink(t, u);
        if substeps > 1 {
            prev = Some((t, u.clone(), v.clone()));
        }
    }
}

struct Flow<'a> {
    kind: FlowKind,
    geo: &'a GeometryField,
    m: f64,
}

impl Flow<'_> {
    /// Right-hand side of the first-order system.
    fn rhs(&self, y: &[SpinorField]) -> Result<Vec<SpinorField>> {
        match self.kind {
            FlowKind::Dirac => Ok(vec![apply_dirac(&y[0], self.geo, self.m)?.scaled(IM)]),
            FlowKind::Squared => {
                let ku = squared_operator(&y[0], self.geo, self.m)?;
                Ok(vec![y[1].clone(), ku.scaled(Complex64::new(-1.0, 0.0))])
            }
            FlowKind::ScalarWave => {
                let ku = scalar_kg_operator(&y[0], self.geo, self.m)?;
                Ok(vec![y[1].clone(), ku.scaled(Complex64::new(-1.0, 0.0))])
            }
        }
    }
}

fn axpy(y: &[SpinorField], a: f64, k: &[SpinorField]) -> Vec<SpinorField> {
    y.iter()
        .zip(k)
        .map(|(y, k)| {
            let mut out = y.clone();
            out.add_scaled(Complex64::new(a, 0.0), k);
            out
        })
        .collect()
}

fn accumulate(acc: &mut [SpinorField], a: f64, k: &[SpinorField]) {
    for (x, k) in acc.iter_mut().zip(k) {
        x.add_scaled(Complex64::new(a, 0.0), k);
    }
}

fn run(
    flow: Flow<'_>,
    initial: Vec<SpinorField>,
    steps: usize,
    dt: f64,
    keep_stride: usize,
    observer: &mut Observer<'_>,
) -> Result<Trajectory> {
    let second_order = initial.len() == 2;
    let mut y = initial;
    let mut times = vec![0.0];
    let mut states = vec![y[0].clone()];
    let mut velocities = second_order.then(|| vec![y[1].clone()]);
    let mut log = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let t = step as f64 * dt;
        if !y[0].is_finite() {
            return Err(Error::Config(format!("non-finite state at t = {t}")));
        }
        let k1 = flow.rhs(&y)?;
        observer(step, t, &y[0], &k1[0]);
        let energy = second_order.then(|| {
            let ku_dot_u = -inner_mh(&k1[1], &y[0], flow.geo).re;
            norm_mh(&y[1], flow.geo).powi(2) + ku_dot_u
        });
        log.push(StepLog {
            t,
            norm: norm_mh(&y[0], flow.geo),
            energy,
        });
        if step > 0 {
            let keep = step == steps || (keep_stride > 0 && step % keep_stride == 0);
            if keep {
                times.push(t);
                states.push(y[0].clone());
                if let Some(v) = velocities.as_mut() {
                    v.push(y[1].clone());
                }
            }
        }
        if step == steps {
            break;
        }
        let mut acc = axpy(&y, dt / 6.0, &k1);
        let k2 = flow.rhs(&axpy(&y, dt / 2.0, &k1))?;
        drop(k1);
        accumulate(&mut acc, dt / 3.0, &k2);
        let k3 = flow.rhs(&axpy(&y, dt / 2.0, &k2))?;
        drop(k2);
        accumulate(&mut acc, dt / 3.0, &k3);
        let k4 = flow.rhs(&axpy(&y, dt, &k3))?;
        accumulate(&mut acc, dt / 6.0, &k4);
        y = acc;
    }
    Ok(Trajectory {
        times,
        states,
        velocities,
        meta: TrajectoryMeta {
            kind: flow.kind,
            integrator: "rk4".into(),
            dt,
            steps,
            mass: flow.m,
            keep_stride,
            log,
        },
    })
}

/// `u(t) = e^{itD_m}u0`, i.e. `∂_t u = i D_m u`, on `[0, t_final]`.
/// A negative `t_final` with negative `dt` runs backwards.
pub fn evolve_dirac(u0: &SpinorField, geo: &GeometryField, m: f64, t_final: f64, dt: f64) -> Result<Trajectory> {
    evolve_dirac_with(u0, geo, m, t_final, dt, &EvolveOptions::default(), &mut |_, _, _, _| {})
}

pub fn evolve_dirac_with(
    u0: &SpinorField,
    geo: &GeometryField,
    m: f64,
    t_final: f64,
    dt: f64,
    opts: &EvolveOptions,
    observer: &mut Observer<'_>,
) -> Result<Trajectory> {
    let (steps, dt) = preflight(geo, &[u0], t_final, dt, opts)?;
    let flow = Flow {
        kind: FlowKind::Dirac,
        geo,
        m,
    };
    run(flow, vec![u0.clone()], steps, dt, opts.keep_stride, observer)
}

/// `∂_t²u + m²u - Δ_h u + ¼R_h u = 0` with `u(0) = u0`, `∂_t u(0) = u1`.
pub fn evolve_squared(
    u0: &SpinorField,
    u1: &SpinorField,
    geo: &GeometryField,
    m: f64,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    evolve_squared_with(u0, u1, geo, m, t_final, dt, &EvolveOptions::default(), &mut |_, _, _, _| {})
}

#[allow(clippy::too_many_arguments)]
pub fn evolve_squared_with(
    u0: &SpinorField,
    u1: &SpinorField,
    geo: &GeometryField,
    m: f64,
    t_final: f64,
    dt: f64,
    opts: &EvolveOptions,
    observer: &mut Observer<'_>,
) -> Result<Trajectory> {
    let (steps, dt) = preflight(geo, &[u0, u1], t_final, dt, opts)?;
    let flow = Flow {
        kind: FlowKind::Squared,
        geo,
        m,
    };
    run(flow, vec![u0.clone(), u1.clone()], steps, dt, opts.keep_stride, observer)
}

/// `∂_t²u + m²u - Δ̃_h u = 0`, componentwise.
pub fn evolve_scalar_wave(
    u0: &SpinorField,
    u1: &SpinorField,
    geo: &GeometryField,
    m: f64,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    evolve_scalar_wave_with(u0, u1, geo, m, t_final, dt, &EvolveOptions::default(), &mut |_, _, _, _| {})
}

#[allow(clippy::too_many_arguments)]
pub fn evolve_scalar_wave_with(
    u0: &SpinorField,
    u1: &SpinorField,
    geo: &GeometryField,
    m: f64,
    t_final: f64,
    dt: f64,
    opts: &EvolveOptions,
    observer: &mut Observer<'_>,
) -> Result<Trajectory> {
    let (steps, dt) = preflight(geo, &[u0, u1], t_final, dt, opts)?;
    let flow = Flow {
        kind: FlowKind::ScalarWave,
        geo,
        m,
    };
    run(flow, vec![u0.clone(), u1.clone()], steps, dt, opts.keep_stride, observer)
}

fn require_flat(geo: &GeometryField, u: &SpinorField) -> Result<()> {
    geo.check_grid(u.grid())?;
    if geo.is_flat() {
        Ok(())
    } else {
        Err(Error::NotFlat)
    }
}

/// `√(m² + |ξ|²)` per mode, with the symbol of the discrete Laplacian.
fn frequency(geo: &GeometryField, m: f64, mode: usize) -> f64 {
    (m * m + geo.spectral().laplacian_symbol(mode)).sqrt()
}

/// `Ẇ_m(t)u0 + W_m(t)u1` with `W_m(t) = sin(tω)/ω`, `ω = √(m² - Δ)`, and
/// `sin(t·0)/0 := t`.
pub fn flat_propagators(
    u0: &SpinorField,
    u1: &SpinorField,
    geo: &GeometryField,
    m: f64,
    t: f64,
) -> Result<SpinorField> {
    require_flat(geo, u0)?;
    require_flat(geo, u1)?;
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let mut out = apply_multiplier(u0, |mode| Complex64::new((t * frequency(geo, m, mode)).cos(), 0.0));
    let w = apply_multiplier(u1, |mode| {
        let om = frequency(geo, m, mode);
        let v = if om == 0.0 { t } else { (t * om).sin() / om };
        Complex64::new(v, 0.0)
    });
    out.add_scaled(Complex64::new(1.0, 0.0), &w);
    Ok(out)
}

/// `i√(m² - Δ) u0`, the velocity of the half-wave `e^{it√(m²-Δ)}u0`.
pub fn half_wave_velocity(u0: &SpinorField, geo: &GeometryField, m: f64) -> SpinorField {
    apply_multiplier(u0, |mode| IM * frequency(geo, m, mode))
}

/// Exact flat Dirac flow `e^{itD_m}u0`: per mode
/// `cos(tλ) + i sin(tλ) S/λ` with `S = α·ξ - βm`, `λ = √(|ξ|² + m²)`.
pub fn flat_dirac_propagator(u0: &SpinorField, geo: &GeometryField, m: f64, t: f64) -> Result<SpinorField> {
    require_flat(geo, u0)?;
    let grid = *u0.grid();
    let n3 = grid.len();
    let spec = geo.spectral();
    let g = build_gammas();
    let mut hat = u0.data().to_vec();
    spec.forward(&mut hat);
    for mode in 0..n3 {
        let k = spec.mode_wavevector(mode);
        let lam = frequency(geo, m, mode);
        let mut s = g.beta * Complex64::new(-m, 0.0);
        for a in 0..3 {
            s += g.alpha[a] * Complex64::new(k[a], 0.0);
        }
        let sinc = if lam == 0.0 { t } else { (t * lam).sin() / lam };
        let prop = nalgebra::Matrix4::<Complex64>::identity() * Complex64::new((t * lam).cos(), 0.0)
            + s * (IM * sinc);
        let v = Vector4::new(hat[mode], hat[n3 + mode], hat[2 * n3 + mode], hat[3 * n3 + mode]);
        let w = prop * v;
        for c in 0..4 {
            hat[c * n3 + mode] = w[c];
        }
    }
    spec.inverse(&mut hat);
    Ok(SpinorField::from_raw(grid, hat))
}

/// `‖u‖²_{L²(M_h)} + ⟨K u, u⟩` for a state pair, with `K` the operator of
/// the given second-order flow.
pub fn energy(kind: FlowKind, u: &SpinorField, v: &SpinorField, geo: &GeometryField, m: f64) -> Result<f64> {
    let ku = match kind {
        FlowKind::Squared => squared_operator(u, geo, m)?,
        FlowKind::ScalarWave => scalar_kg_operator(u, geo, m)?,
        FlowKind::Dirac => return Err(Error::Config("energy is defined for second-order flows".into())),
    };
    Ok(norm_mh(v, geo).powi(2) + inner_mh(&ku, u, geo).re)
}

/// Zero field on the grid of `u`.
pub fn zeros_like(u: &SpinorField) -> SpinorField {
    SpinorField::zeros(*u.grid())
}
