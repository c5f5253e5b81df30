//! Functionals of the dispersive estimates: `L^p(M_h)` norms, Sobolev
//! proxies, admissible triples, local smoothing, Strichartz norms and the
//! Dirac/Laplacian norm equivalence.
//!
//! Fractional powers of `-Δ̃_h` are replaced by flat Fourier multipliers
//! applied to `(det h)^{1/4} f`. Time integrals cover the sampled window
//! `[0, T]` only, so every ratio is a lower bound for its time-global value.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::metric::{bracket, MetricFamily};
use crate::operators::dirac::{apply_dirac, apply_multiplier, gradient, norm_mh};
use crate::operators::field::SpinorField;
use crate::operators::geofield::GeometryField;
use crate::operators::grid::{Grid, Spectral};

/// Default ε in the weights `⟨x⟩^{-1/2-ε}`, `⟨x⟩^{-3/2-ε}`.
pub const DEFAULT_EPS: f64 = 0.05;

/// Largest share of the `L²` mass the removed zero mode may carry.
pub const ZERO_MODE_LIMIT: f64 = 0.01;

const ADMISSIBLE_TOL: f64 = 1e-12;

/// `(Σ |f|^p √det h Δx³)^{1/p}`; `p = ∞` gives `max |f|`.
pub fn lp_norm_mh(f: &SpinorField, geo: &GeometryField, p: f64) -> f64 {
    let grid = f.grid();
    if p.is_infinite() {
        return f.max_abs();
    }
    let mut s = 0.0;
    for node in 0..grid.len() {
        let v = crate::operators::field::spinor_norm(&f.node(node));
        if v > 0.0 {
            s += v.powf(p) * geo.node(node).sqrt_det;
        }
    }
    (s * grid.cell_volume()).powf(1.0 / p)
}

/// Flat `L^r` norm of the grid field.
fn flat_lr(f: &SpinorField, r: f64) -> f64 {
    if r.is_infinite() {
        return f.max_abs();
    }
    let grid = f.grid();
    let mut s = 0.0;
    for node in 0..grid.len() {
        let v = crate::operators::field::spinor_norm(&f.node(node));
        if v > 0.0 {
            s += v.powf(r);
        }
    }
    (s * grid.cell_volume()).powf(1.0 / r)
}

/// `𝒱 f = (det h)^{1/4} f`, unitary from `L²(M_h)` to flat `L²`.
pub fn density_transform(f: &SpinorField, geo: &GeometryField) -> SpinorField {
    let mut out = f.clone();
    let n3 = f.grid().len();
    let data = out.data_mut();
    for node in 0..n3 {
        let w = geo.node(node).sqrt_det.sqrt();
        for c in 0..4 {
            data[c * n3 + node] *= w;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevValue {
    pub value: f64,
    /// Share of the `L²` mass on modes whose multiplier is undefined
    /// (`|ξ| = 0` with `s < 0`) and which were projected out.
    pub zero_mode_fraction: f64,
    pub zero_mode_removed: bool,
}

/// Proxy for `‖(-Δ̃_h)^{s/2} f‖_{L^r(M_h)}` (homogeneous) or
/// `‖(1 - Δ̃_h)^{s/2} f‖_{L^r(M_h)}`: the flat multiplier `|ξ|^s` or
/// `(1 + |ξ|²)^{s/2}` applied to `𝒱 f`, then the flat `L^r` norm.
pub fn sobolev_norm_detailed(
    f: &SpinorField,
    geo: &GeometryField,
    s: f64,
    r: f64,
    homogeneous: bool,
) -> Result<SobolevValue> {
    geo.check_grid(f.grid())?;
    if !(-2.0..=2.0).contains(&s) || r.is_nan() || r <= 1.0 {
        return Err(Error::Config(format!("Sobolev exponents out of range: s={s}, r={r}")));
    }
    let g = density_transform(f, geo);
    let spec = geo.spectral();
    let removes = homogeneous && s < 0.0;
    let mut zero_mode_fraction = 0.0;
    if removes {
        let n3 = g.grid().len();
        let mut hat = g.data().to_vec();
        spec.forward(&mut hat);
        let total: f64 = hat.iter().map(|z| z.norm_sqr()).sum();
        let removed: f64 = (0..n3)
            .filter(|&m| spec.laplacian_symbol(m) == 0.0)
            .map(|m| (0..4).map(|c| hat[c * n3 + m].norm_sqr()).sum::<f64>())
            .sum();
        zero_mode_fraction = if total > 0.0 { removed / total } else { 0.0 };
        if zero_mode_fraction > ZERO_MODE_LIMIT {
            return Err(Error::ZeroModeDominance {
                fraction: zero_mode_fraction,
            });
        }
    }
    let shaped = if s == 0.0 {
        g
    } else {
        apply_multiplier(&g, |mode| {
            let k2 = spec.laplacian_symbol(mode);
            let v = if homogeneous {
                if k2 == 0.0 {
                    0.0
                } else {
                    k2.powf(s / 2.0)
                }
            } else {
                (1.0 + k2).powf(s / 2.0)
            };
            Complex64::new(v, 0.0)
        })
    };
    Ok(SobolevValue {
        value: flat_lr(&shaped, r),
        zero_mode_fraction,
        zero_mode_removed: removes && zero_mode_fraction > 0.0,
    })
}

pub fn sobolev_norm(f: &SpinorField, geo: &GeometryField, s: f64, r: f64, homogeneous: bool) -> Result<f64> {
    Ok(sobolev_norm_detailed(f, geo, s, r, homogeneous)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleKind {
    Wave,
    KleinGordon,
}

/// Exponents `(s, q, r)`; `q` and `r` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleTriple {
    pub s: f64,
    #[serde(with = "exponent")]
    pub q: f64,
    #[serde(with = "exponent")]
    pub r: f64,
    pub kind: TripleKind,
}

/// Lebesgue exponents with `∞` written as the string `"inf"` (JSON has no
/// infinity).
mod exponent {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" || t == "infinity" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid exponent `{t}`"))),
        }
    }
}

impl AdmissibleTriple {
    pub fn wave(s: f64, q: f64, r: f64) -> Self {
        Self {
            s,
            q,
            r,
            kind: TripleKind::Wave,
        }
    }

    pub fn klein_gordon(s: f64, q: f64, r: f64) -> Self {
        Self {
            s,
            q,
            r,
            kind: TripleKind::KleinGordon,
        }
    }

    /// Admissible but outside the massive estimate, which needs `q > 2`.
    pub fn excluded_endpoint(&self) -> bool {
        self.kind == TripleKind::KleinGordon && is_admissible(self) && (self.q - 2.0).abs() <= ADMISSIBLE_TOL
    }
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

pub fn is_admissible(t: &AdmissibleTriple) -> bool {
    let (s, q, r) = (t.s, t.q, t.r);
    if s.is_nan() || q.is_nan() || r.is_nan() || q < 2.0 || r < 2.0 {
        return false;
    }
    let scaling = (s - (0.5 - inv(r) + inv(q))).abs() <= ADMISSIBLE_TOL;
    match t.kind {
        TripleKind::Wave => r.is_finite() && (inv(q) - (0.5 - inv(r))).abs() <= ADMISSIBLE_TOL && scaling,
        TripleKind::KleinGordon => {
            r <= 6.0 && (2.0 * inv(q) - (1.5 - 3.0 * inv(r))).abs() <= ADMISSIBLE_TOL && scaling
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSample {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub functional: String,
    pub value: f64,
    /// Right-hand side norm of the estimate.
    pub normalizer: f64,
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<AdmissibleTriple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub mass: f64,
    pub t_final: f64,
    pub grid: Grid,
    pub family: MetricFamily,
    /// Per-snapshot integrand values.
    pub samples: Vec<TimeSample>,
    pub notes: Vec<String>,
}

impl NormReport {
    fn new(functional: &str, value: f64, normalizer: f64, geo: &GeometryField, mass: f64) -> Self {
        Self {
            functional: functional.into(),
            value,
            normalizer,
            ratio: ratio(value, normalizer),
            triple: None,
            epsilon: None,
            mass,
            t_final: 0.0,
            grid: *geo.grid(),
            family: geo.params().family,
            samples: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.normalizer.is_finite() && self.ratio.is_finite()
    }
}

fn ratio(value: f64, normalizer: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else {
        value / normalizer
    }
}

const WINDOW_NOTE: &str = "time integral over the sampled window only; lower bound for the global functional";

/// Trapezoid rule on possibly non-uniform samples.
pub fn trapezoid(samples: &[TimeSample]) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t).abs() * (w[0].value + w[1].value))
        .sum()
}

/// `(∫ v^q dt)^{1/q}`, `q = ∞` giving the sup.
pub fn lq_time(samples: &[TimeSample], q: f64) -> f64 {
    if q.is_infinite() {
        return samples.iter().map(|s| s.value).fold(0.0, f64::max);
    }
    let powered: Vec<TimeSample> = samples
        .iter()
        .map(|s| TimeSample {
            t: s.t,
            value: s.value.powf(q),
        })
        .collect();
    trapezoid(&powered).powf(1.0 / q)
}

/// `(Σ ⟨x⟩^{-2a} |u|² √g Δx³, Σ ⟨x⟩^{-2b} h^{ij}⟨∂_iu, ∂_ju⟩ √g Δx³)`.
fn weighted_squares(u: &SpinorField, geo: &GeometryField, a: f64, b: Option<f64>) -> (f64, f64) {
    let grid = u.grid();
    let n3 = grid.len();
    let grad = b.map(|_| gradient(u));
    let mut zeroth = 0.0;
    let mut first = 0.0;
    for p in 0..n3 {
        let node = geo.node(p);
        let w = bracket(grid.point(p));
        let v = u.node(p);
        zeroth += w.powf(-2.0 * a) * v.iter().map(|z| z.norm_sqr()).sum::<f64>() * node.sqrt_det;
        if let (Some(g), Some(b)) = (grad.as_ref(), b) {
            let mut q = 0.0;
            for c in 0..4 {
                let d = [g[0].data()[c * n3 + p], g[1].data()[c * n3 + p], g[2].data()[c * n3 + p]];
                for i in 0..3 {
                    for j in 0..3 {
                        q += node.h_inv[(i, j)] * (d[i].conj() * d[j]).re;
                    }
                }
            }
            first += w.powf(-2.0 * b) * q * node.sqrt_det;
        }
    }
    let dv = grid.cell_volume();
    (zeroth * dv, first * dv)
}

/// Streaming form of the Dirac local-smoothing functional
/// `‖⟨x⟩^{-3/2-ε}u‖_{L²_tL²} + ‖⟨x⟩^{-1/2-ε}∇̃u‖_{L²_tL²}` against `‖D_m u0‖`.
#[derive(Clone)]
pub struct LocalSmoothing<'a> {
    geo: &'a GeometryField,
    eps: f64,
    mass: f64,
    normalizer: f64,
    zeroth: Vec<TimeSample>,
    first: Vec<TimeSample>,
}

impl<'a> LocalSmoothing<'a> {
    pub fn new(u0: &SpinorField, geo: &'a GeometryField, m: f64, eps: f64) -> Result<Self> {
        if eps <= 0.0 {
            return Err(Error::Config(format!("weight exponent ε must be positive, got {eps}")));
        }
        let normalizer = norm_mh(&apply_dirac(u0, geo, m)?, geo);
        Ok(Self {
            geo,
            eps,
            mass: m,
            normalizer,
            zeroth: Vec::new(),
            first: Vec::new(),
        })
    }

    pub fn observe(&mut self, t: f64, u: &SpinorField) -> Result<()> {
        self.geo.check_grid(u.grid())?;
        let (z, f) = weighted_squares(u, self.geo, 1.5 + self.eps, Some(0.5 + self.eps));
        self.zeroth.push(TimeSample { t, value: z });
        self.first.push(TimeSample { t, value: f });
        Ok(())
    }

    pub fn finish(self) -> NormReport {
        let value = trapezoid(&self.zeroth).sqrt() + trapezoid(&self.first).sqrt();
        let mut r = NormReport::new("local_smoothing", value, self.normalizer, self.geo, self.mass);
        r.epsilon = Some(self.eps);
        r.t_final = self.zeroth.last().map_or(0.0, |s| s.t);
        r.samples = self
            .zeroth
            .iter()
            .zip(&self.first)
            .map(|(a, b)| TimeSample { t: a.t, value: a.value + b.value })
            .collect();
        r.notes.push(WINDOW_NOTE.into());
        r
    }
}

/// Streaming form of `‖⟨x⟩^{-1/2-ε} u‖_{L²_tL²(M_h)}` for half-wave flows,
/// against `‖f‖_{L²}` (m = 0) or `‖(1 - Δ̃_h)^{1/4} f‖_{L²}` (m > 0).
#[derive(Clone)]
pub struct WaveSmoothing<'a> {
    geo: &'a GeometryField,
    eps: f64,
    mass: f64,
    normalizer: f64,
    samples: Vec<TimeSample>,
}

impl<'a> WaveSmoothing<'a> {
    pub fn new(f: &SpinorField, geo: &'a GeometryField, m: f64, eps: f64) -> Result<Self> {
        if eps <= 0.0 {
            return Err(Error::Config(format!("weight exponent ε must be positive, got {eps}")));
        }
        let normalizer = if m == 0.0 {
            norm_mh(f, geo)
        } else {
            sobolev_norm(f, geo, 0.5, 2.0, false)?
        };
        Ok(Self {
            geo,
            eps,
            mass: m,
            normalizer,
            samples: Vec::new(),
        })
    }

    pub fn observe(&mut self, t: f64, u: &SpinorField) -> Result<()> {
        self.geo.check_grid(u.grid())?;
        let (z, _) = weighted_squares(u, self.geo, 0.5 + self.eps, None);
        self.samples.push(TimeSample { t, value: z });
        Ok(())
    }

    pub fn finish(self) -> NormReport {
        let value = trapezoid(&self.samples).sqrt();
        let name = if self.mass == 0.0 {
            "wave_smoothing"
        } else {
            "klein_gordon_smoothing"
        };
        let mut r = NormReport::new(name, value, self.normalizer, self.geo, self.mass);
        r.epsilon = Some(self.eps);
        r.t_final = self.samples.last().map_or(0.0, |s| s.t);
        r.samples = self.samples;
        r.notes.push(WINDOW_NOTE.into());
        r
    }
}

/// Streaming Strichartz functional: `‖u‖_{L^q_t Ḣ^{1-s}_r}` against
/// `‖u0‖_{Ḣ¹}` (m = 0, wave triple) or `‖u‖_{L^q_t H^{1/2-s}_r}` against
/// `‖u0‖_{H¹}` (m > 0, Klein–Gordon triple with q > 2).
#[derive(Clone)]
pub struct Strichartz<'a> {
    geo: &'a GeometryField,
    triple: AdmissibleTriple,
    mass: f64,
    normalizer: f64,
    samples: Vec<TimeSample>,
    zero_mode_removed: bool,
}

impl<'a> Strichartz<'a> {
    pub fn new(u0: &SpinorField, geo: &'a GeometryField, triple: AdmissibleTriple, m: f64) -> Result<Self> {
        let expected = if m == 0.0 {
            TripleKind::Wave
        } else {
            TripleKind::KleinGordon
        };
        if triple.kind != expected || !is_admissible(&triple) {
            return Err(Error::NotAdmissible {
                s: triple.s,
                q: triple.q,
                r: triple.r,
            });
        }
        if triple.excluded_endpoint() {
            return Err(Error::ExcludedEndpoint);
        }
        let normalizer = sobolev_norm(u0, geo, 1.0, 2.0, m == 0.0)?;
        Ok(Self {
            geo,
            triple,
            mass: m,
            normalizer,
            samples: Vec::new(),
            zero_mode_removed: false,
        })
    }

    fn spatial_order(&self) -> f64 {
        if self.mass == 0.0 {
            1.0 - self.triple.s
        } else {
            0.5 - self.triple.s
        }
    }

    pub fn observe(&mut self, t: f64, u: &SpinorField) -> Result<()> {
        let v = sobolev_norm_detailed(u, self.geo, self.spatial_order(), self.triple.r, self.mass == 0.0)?;
        self.zero_mode_removed |= v.zero_mode_removed;
        self.samples.push(TimeSample { t, value: v.value });
        Ok(())
    }

    pub fn finish(self) -> NormReport {
        let value = lq_time(&self.samples, self.triple.q);
        let name = if self.mass == 0.0 {
            "strichartz_massless"
        } else {
            "strichartz_massive"
        };
        let mut r = NormReport::new(name, value, self.normalizer, self.geo, self.mass);
        r.triple = Some(self.triple);
        r.t_final = self.samples.last().map_or(0.0, |s| s.t);
        r.samples = self.samples;
        r.notes.push(WINDOW_NOTE.into());
        r.notes.push("fractional Sobolev norms use the flat multiplier proxy on (det h)^{1/4} u".into());
        if self.zero_mode_removed {
            r.notes.push("zero mode projected out".into());
        }
        r
    }
}

fn stored_snapshots(traj: &Trajectory) -> impl Iterator<Item = (f64, &SpinorField)> {
    traj.times.iter().copied().zip(traj.states.iter())
}

pub fn local_smoothing_functional(traj: &Trajectory, geo: &GeometryField, eps: f64) -> Result<NormReport> {
    let mut acc = LocalSmoothing::new(&traj.states[0], geo, traj.meta.mass, eps)?;
    for (t, u) in stored_snapshots(traj) {
        acc.observe(t, u)?;
    }
    Ok(acc.finish())
}

pub fn wave_kg_smoothing_functional(traj: &Trajectory, geo: &GeometryField, m: f64, eps: f64) -> Result<NormReport> {
    let mut acc = WaveSmoothing::new(&traj.states[0], geo, m, eps)?;
    for (t, u) in stored_snapshots(traj) {
        acc.observe(t, u)?;
    }
    Ok(acc.finish())
}

pub fn strichartz_functional(
    traj: &Trajectory,
    geo: &GeometryField,
    triple: AdmissibleTriple,
    m: f64,
) -> Result<NormReport> {
    let mut acc = Strichartz::new(&traj.states[0], geo, triple, m)?;
    for (t, u) in stored_snapshots(traj) {
        acc.observe(t, u)?;
    }
    Ok(acc.finish())
}

/// Both sides of `‖(m² - Δ̃_h)^{1/2}u‖ ≈ ‖D_m u‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEquivalence {
    pub dirac_norm: f64,
    /// Flat multiplier `√(m² + |ξ|²)` on `(det h)^{1/4} u`.
    pub multiplier_norm: f64,
    /// `⟨(m² - Δ̃_h)u, u⟩^{1/2}` with the exact grid `Δ̃_h`.
    pub quadratic_norm: f64,
}

impl NormEquivalence {
    /// `‖D_m u‖ / ‖(m² - Δ̃_h)^{1/2}u‖` by the multiplier proxy.
    pub fn ratio_multiplier(&self) -> f64 {
        self.dirac_norm / self.multiplier_norm
    }

    pub fn ratio_quadratic(&self) -> f64 {
        self.dirac_norm / self.quadratic_norm
    }

    /// Every ratio and reciprocal lies in `[1/c, c]`.
    pub fn within(&self, c: f64) -> bool {
        [self.ratio_multiplier(), self.ratio_quadratic()]
            .iter()
            .all(|r| r.is_finite() && *r >= 1.0 / c && *r <= c)
    }

    pub fn reports(&self, geo: &GeometryField, m: f64) -> Vec<NormReport> {
        let mut a = NormReport::new("norm_equivalence_multiplier", self.dirac_norm, self.multiplier_norm, geo, m);
        a.notes.push("normalizer uses the flat multiplier proxy".into());
        let b = NormReport::new("norm_equivalence_quadratic", self.dirac_norm, self.quadratic_norm, geo, m);
        vec![a, b]
    }
}

pub fn norm_equivalence_check(u: &SpinorField, geo: &GeometryField, m: f64) -> Result<NormEquivalence> {
    geo.check_grid(u.grid())?;
    let dirac_norm = norm_mh(&apply_dirac(u, geo, m)?, geo);
    let spec: &Spectral = geo.spectral();
    let g = density_transform(u, geo);
    let multiplier_norm = apply_multiplier(&g, |mode| Complex64::new((m * m + spec.laplacian_symbol(mode)).sqrt(), 0.0))
        .flat_norm_squared()
        .sqrt();
    let (mass, grad) = weighted_squares(u, geo, 0.0, Some(0.0));
    let quadratic_norm = (m * m * mass + grad).sqrt();
    Ok(NormEquivalence {
        dirac_norm,
        multiplier_norm,
        quadratic_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve_dirac, flat_dirac_propagator};
    use crate::metric::MetricParams;
    use crate::operators::field::{wavepacket, C0};
    use crate::operators::grid::Grid;

    fn flat(l: f64, n: usize) -> GeometryField {
        GeometryField::flat(Grid::new(l, n).unwrap())
    }

    #[test]
    fn gaussian_l2_mass() {
        let geo = flat(6.0, 32);
        let w: f64 = 0.9;
        // ∫ e^{-|x|²/w²} dx = π^{3/2} w³
        let mass = std::f64::consts::PI.powf(1.5) * w.powi(3);
        let u = wavepacket(*geo.grid(), [0.0; 3], w, [0.0; 3], 0).scaled(Complex64::new(mass.powf(-0.5), 0.0));
        assert!((lp_norm_mh(&u, &geo, 2.0) - 1.0).abs() < 1e-8);
        assert_eq!(lp_norm_mh(&SpinorField::zeros(*geo.grid()), &geo, 3.0), 0.0);
    }

    #[test]
    fn conformal_weight_matches_direct_quadrature() {
        let grid = Grid::new(6.0, 24).unwrap();
        let params = MetricParams::conformal(0.1).with_cutoff(3.5);
        let geo = GeometryField::new(grid, &params).unwrap();
        let u = wavepacket(grid, [0.2, 0.0, -0.3], 1.0, [1.0, 0.0, 0.0], 1);
        // √det h = e^{3φ} inside the untapered ball
        let direct: f64 = (0..grid.len())
            .map(|p| {
                let x = grid.point(p);
                let w = if geo.node(p).tapered {
                    geo.node(p).sqrt_det
                } else {
                    let r2: f64 = x.iter().map(|c| c * c).sum();
                    (3.0 * 0.1 * (1.0 + r2).powf(-0.75)).exp()
                };
                u.node(p).iter().map(|z| z.norm_sqr()).sum::<f64>() * w
            })
            .sum::<f64>()
            * grid.cell_volume();
        let ours = lp_norm_mh(&u, &geo, 2.0).powi(2);
        assert!((ours - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn sobolev_s0_is_lp() {
        let geo = flat(6.0, 24);
        let u = wavepacket(*geo.grid(), [0.0; 3], 1.0, [1.0, 0.0, 0.0], 0);
        for r in [2.0, 3.0, 4.0] {
            let a = sobolev_norm(&u, &geo, 0.0, r, true).unwrap();
            assert!((a - lp_norm_mh(&u, &geo, r)).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn h1_of_modulated_packet_concentrates() {
        let geo = flat(8.0, 64);
        let k = 6.0;
        let u = wavepacket(*geo.grid(), [0.0; 3], 2.5, [k, 0.0, 0.0], 0);
        let h1 = sobolev_norm(&u, &geo, 1.0, 2.0, true).unwrap();
        let l2 = lp_norm_mh(&u, &geo, 2.0);
        assert!((h1 / (k * l2) - 1.0).abs() < 0.02, "{}", h1 / (k * l2));
    }

    #[test]
    fn multiplier_composition() {
        let geo = flat(6.0, 24);
        let u = wavepacket(*geo.grid(), [0.0; 3], 1.0, [1.0, 0.0, 0.0], 0);
        let spec = geo.spectral();
        let quarter = apply_multiplier(&u, |m| Complex64::new(spec.laplacian_symbol(m).powf(0.25), 0.0));
        let a = sobolev_norm(&u, &geo, 1.0, 2.0, true).unwrap();
        let b = sobolev_norm(&quarter, &geo, 0.5, 2.0, true).unwrap();
        assert!((a - b).abs() <= 1e-9 * a);
    }

    #[test]
    fn zero_mode_dominance() {
        let geo = flat(4.0, 16);
        let c = SpinorField::from_fn(*geo.grid(), |_| [Complex64::new(1.0, 0.0), C0, C0, C0]);
        assert!(matches!(
            sobolev_norm(&c, &geo, -0.5, 2.0, true),
            Err(Error::ZeroModeDominance { .. })
        ));
        let u = wavepacket(*geo.grid(), [0.0; 3], 0.6, [3.0, 0.0, 0.0], 0);
        let v = sobolev_norm_detailed(&u, &geo, -0.5, 2.0, true).unwrap();
        assert!(v.zero_mode_fraction < ZERO_MODE_LIMIT);
    }

    #[test]
    fn admissibility() {
        assert!(is_admissible(&AdmissibleTriple::wave(0.5, 4.0, 4.0)));
        assert!(!is_admissible(&AdmissibleTriple::wave(0.5, 2.0, f64::INFINITY)));
        assert!(is_admissible(&AdmissibleTriple::klein_gordon(5.0 / 12.0, 4.0, 3.0)));
        let end = AdmissibleTriple::klein_gordon(5.0 / 6.0, 2.0, 6.0);
        assert!(is_admissible(&end));
        assert!(end.excluded_endpoint());
        assert!(!AdmissibleTriple::klein_gordon(5.0 / 12.0, 4.0, 3.0).excluded_endpoint());
        assert!(!is_admissible(&AdmissibleTriple::klein_gordon(0.5, 4.0, 3.0)));
    }

    #[test]
    fn strichartz_rejects_bad_triples() {
        let geo = flat(4.0, 16);
        let u = wavepacket(*geo.grid(), [0.0; 3], 0.8, [1.0, 0.0, 0.0], 0);
        let end = AdmissibleTriple::klein_gordon(5.0 / 6.0, 2.0, 6.0);
        assert!(matches!(Strichartz::new(&u, &geo, end, 1.0), Err(Error::ExcludedEndpoint)));
        let bad = AdmissibleTriple::wave(0.3, 4.0, 4.0);
        assert!(matches!(Strichartz::new(&u, &geo, bad, 0.0), Err(Error::NotAdmissible { .. })));
        let kg = AdmissibleTriple::klein_gordon(5.0 / 12.0, 4.0, 3.0);
        assert!(matches!(Strichartz::new(&u, &geo, kg, 0.0), Err(Error::NotAdmissible { .. })));
    }

    #[test]
    fn zero_data_gives_zero_functionals() {
        let geo = flat(6.0, 16);
        let z = SpinorField::zeros(*geo.grid());
        let traj = evolve_dirac(&z, &geo, 0.0, 0.5, 0.1).unwrap();
        assert_eq!(local_smoothing_functional(&traj, &geo, DEFAULT_EPS).unwrap().value, 0.0);
        let s = strichartz_functional(&traj, &geo, AdmissibleTriple::wave(0.5, 4.0, 4.0), 0.0).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.ratio, 0.0);
        assert_eq!(wave_kg_smoothing_functional(&traj, &geo, 0.0, DEFAULT_EPS).unwrap().value, 0.0);
    }

    #[test]
    fn flat_norm_equivalence_is_exact() {
        let geo = flat(6.0, 24);
        let u = wavepacket(*geo.grid(), [0.0; 3], 1.0, [1.0, 0.5, 0.0], 2);
        let e = norm_equivalence_check(&u, &geo, 0.0).unwrap();
        assert!((e.ratio_multiplier() - 1.0).abs() < 1e-10);
        assert!((e.ratio_quadratic() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn large_mass_equivalence() {
        let grid = Grid::new(6.0, 24).unwrap();
        let geo = GeometryField::new(grid, &MetricParams::conformal(0.1).with_cutoff(4.0)).unwrap();
        let u = wavepacket(grid, [0.0; 3], 1.5, [0.0; 3], 0);
        let e = norm_equivalence_check(&u, &geo, 2.0).unwrap();
        assert!((e.ratio_quadratic() - 1.0).abs() < 0.05, "{e:?}");
        assert!((e.ratio_multiplier() - 1.0).abs() < 0.05, "{e:?}");
    }

    #[test]
    fn strichartz_is_monotone_in_time() {
        let geo = flat(6.0, 24);
        let u0 = wavepacket(*geo.grid(), [0.0; 3], 0.8, [2.0, 0.0, 0.0], 0);
        let triple = AdmissibleTriple::wave(0.5, 4.0, 4.0);
        let mut acc = Strichartz::new(&u0, &geo, triple, 0.0).unwrap();
        let mut last = 0.0;
        for i in 0..=10 {
            let t = 0.1 * i as f64;
            acc.observe(t, &flat_dirac_propagator(&u0, &geo, 0.0, t).unwrap()).unwrap();
            let v = lq_time(&acc.samples, 4.0);
            assert!(v >= last);
            last = v;
        }
        assert!(acc.finish().is_finite());
    }
}
