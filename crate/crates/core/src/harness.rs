//! Experiment configs, runners and reports behind the command-line tool.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    dense_output, evolve_dirac_with, evolve_squared_with, flat_dirac_propagator, wraparound_cap, EvolveOptions,
};
use crate::metric::{MetricParams, Taper};
use crate::norms::{
    norm_equivalence_check, sobolev_norm, AdmissibleTriple, LocalSmoothing, NormReport, Strichartz, TripleKind, WaveSmoothing,
    DEFAULT_EPS,
};
use crate::operators::dirac::{apply_dirac, apply_multiplier, norm_mh, squaring_residual, SquaringResidual};
use crate::operators::field::{wavepacket, SpinorField, IM};
use crate::operators::geofield::GeometryField;
use crate::operators::grid::Grid;

pub const SCHEMA_VERSION: u32 = 1;

/// Fewest time samples in any time-integrated functional.
pub const MIN_TIME_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    IdentityCheck,
    Convergence,
    Smoothing,
    Strichartz,
    NormEquivalence,
    WaveCrossCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::IdentityCheck,
        Experiment::Convergence,
        Experiment::Smoothing,
        Experiment::Strichartz,
        Experiment::NormEquivalence,
        Experiment::WaveCrossCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::IdentityCheck => "identity_check",
            Experiment::Convergence => "convergence",
            Experiment::Smoothing => "smoothing",
            Experiment::Strichartz => "strichartz",
            Experiment::NormEquivalence => "norm_equivalence",
            Experiment::WaveCrossCheck => "wave_cross_check",
        }
    }

    pub fn summary(&self) -> &'static str {
        match self {
            Experiment::IdentityCheck => "squaring identity residuals D_m^2 vs m^2 - Δ_h + R_h/4 on one grid",
            Experiment::Convergence => "squaring residual under grid refinement with fitted order",
            Experiment::Smoothing => "local smoothing ratios across a carrier sweep",
            Experiment::Strichartz => "Strichartz ratios for admissible triples across a carrier sweep",
            Experiment::NormEquivalence => "‖D_m u‖ against ‖(m^2 - Δ̃_h)^{1/2} u‖ on seeded random fields",
            Experiment::WaveCrossCheck => "Dirac flow against the squared system, unitarity and reversibility",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Grid sizes of a convergence study.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refinements: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    /// Dump every `snapshot_stride`-th time sample as a raw field; 0 disables.
    #[serde(default)]
    pub snapshot_stride: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_final: 2.0,
            dt: 0.02,
            snapshot_stride: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub center: [f64; 3],
    pub width: f64,
    #[serde(default)]
    pub carrier: [f64; 3],
    #[serde(default)]
    pub polarization: usize,
    /// Carrier magnitudes of a sweep along the direction of `carrier`
    /// (the x axis when `carrier` is zero).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<f64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            center: [0.0; 3],
            width: 1.0,
            carrier: [0.0; 3],
            polarization: 0,
            sweep: Vec::new(),
        }
    }
}

impl DataConfig {
    fn direction(&self) -> [f64; 3] {
        let n = self.carrier.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n == 0.0 {
            [1.0, 0.0, 0.0]
        } else {
            self.carrier.map(|c| c / n)
        }
    }

    /// Carrier vectors to run: the sweep if given, else `carrier` alone.
    pub fn carriers(&self) -> Vec<[f64; 3]> {
        if self.sweep.is_empty() {
            vec![self.carrier]
        } else {
            let d = self.direction();
            self.sweep.iter().map(|&k| d.map(|c| c * k)).collect()
        }
    }

    pub fn packet(&self, grid: Grid, carrier: [f64; 3]) -> SpinorField {
        wavepacket(grid, self.center, self.width, carrier, self.polarization)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub flat_residual: f64,
    pub curved_residual: f64,
    pub residual_agreement: f64,
    pub convergence_order: f64,
    pub sweep_factor: f64,
    pub flat_comparison_factor: f64,
    pub equivalence_factor: f64,
    pub flat_equivalence: f64,
    pub cross_check: f64,
    pub norm_drift: f64,
    pub reversibility: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            flat_residual: 1e-10,
            curved_residual: 1e-3,
            residual_agreement: 1e-9,
            convergence_order: 4.0,
            sweep_factor: 2.0,
            flat_comparison_factor: 2.0,
            equivalence_factor: 2.0,
            flat_equivalence: 1e-10,
            cross_check: 1e-4,
            norm_drift: 1e-6,
            reversibility: 1e-6,
        }
    }
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

fn default_draws() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub metric: MetricParams,
    pub grid: GridConfig,
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triples: Vec<AdmissibleTriple>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    /// Also run the flat metric on the same data and compare ratios.
    #[serde(default)]
    pub compare_flat: bool,
    /// Add the half-wave smoothing functional to a smoothing run.
    #[serde(default)]
    pub half_wave: bool,
    /// Random fields in a norm-equivalence run.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text` after applying `key.path=value` overrides; values are
    /// read as TOML literals and fall back to strings.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.half_width, self.grid.n).map_err(|e| config_error(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.metric.validate().map_err(|e| config_error(e.to_string()))?;
        let grid = self.grid()?;
        for &n in &self.grid.refinements {
            Grid::new(self.grid.half_width, n).map_err(|e| config_error(e.to_string()))?;
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(config_error(format!("mass must be finite and non-negative, got {}", self.mass)));
        }
        if !(self.eps > 0.0) {
            return Err(config_error(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.time.t_final >= 0.0 && self.time.dt > 0.0) {
            return Err(config_error("time.T must be >= 0 and time.dt > 0"));
        }
        let d = &self.data;
        if !(d.width > 0.0) || d.polarization > 3 {
            return Err(config_error("data.width must be positive and data.polarization in 0..=3"));
        }
        if d.sweep.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(config_error("data.sweep entries must be non-negative"));
        }
        match self.experiment {
            Experiment::Convergence if self.grid.refinements.len() < 2 => {
                return Err(config_error("convergence needs at least two grid.refinements"));
            }
            Experiment::Strichartz if self.triples.is_empty() => {
                return Err(config_error("strichartz needs at least one triple"));
            }
            Experiment::NormEquivalence if self.draws == 0 => {
                return Err(config_error("draws must be positive"));
            }
            _ => {}
        }
        let timed = matches!(
            self.experiment,
            Experiment::Smoothing | Experiment::Strichartz | Experiment::WaveCrossCheck
        );
        if timed {
            for k in d.carriers() {
                let cap = wraparound_cap(&d.packet(grid, k));
                if self.time.t_final > cap {
                    return Err(config_error(format!(
                        "time.T = {} exceeds the wrap-around cap {cap:.3} of this box and data",
                        self.time.t_final
                    )));
                }
            }
        }
        Ok(())
    }
}

fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{spec}` is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override path `{key}` crosses a non-table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| config_error(format!("override path `{key}` crosses a non-table")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="`, `">="` or `"within_factor"` (value and 1/value at most the threshold).
    pub comparison: String,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison: "<=".into(),
            threshold,
            passed: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison: ">=".into(),
            threshold,
            passed: value >= threshold,
        }
    }

    pub fn within_factor(name: impl Into<String>, value: f64, factor: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison: "within_factor".into(),
            threshold: factor,
            passed: value.is_finite() && value > 0.0 && value <= factor && 1.0 / value <= factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub n: usize,
    #[serde(flatten)]
    pub residual: SquaringResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub version: String,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub norms: Vec<NormReport>,
    pub residuals: Vec<ResidualEntry>,
    /// Scalar diagnostics without a pass flag.
    pub diagnostics: BTreeMap<String, f64>,
    pub passed: bool,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            checks: Vec::new(),
            norms: Vec::new(),
            residuals: Vec::new(),
            diagnostics: BTreeMap::new(),
            passed: true,
            wall_clock_seconds: 0.0,
        }
    }

    fn finish(mut self, start: Instant) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self.wall_clock_seconds = start.elapsed().as_secs_f64();
        self
    }
}

/// Runs the configured experiment. Module errors come back wrapped with
/// the stage that raised them.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_with_dumps(config, None)
}

/// As [`run_experiment`], writing sampled fields below `dump_dir` when
/// `time.snapshot_stride > 0`.
pub fn run_experiment_with_dumps(config: &ExperimentConfig, dump_dir: Option<&Path>) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let mut report = RunReport::new(config.clone());
    let dumps = Dumps {
        dir: dump_dir.map(Path::to_path_buf),
        stride: config.time.snapshot_stride,
    };
    match config.experiment {
        Experiment::IdentityCheck => identity_check(config, &mut report)?,
        Experiment::Convergence => convergence(config, &mut report)?,
        Experiment::Smoothing => smoothing(config, &mut report, &dumps)?,
        Experiment::Strichartz => strichartz(config, &mut report, &dumps)?,
        Experiment::NormEquivalence => norm_equivalence(config, &mut report)?,
        Experiment::WaveCrossCheck => wave_cross_check(config, &mut report)?,
    }
    Ok(report.finish(start))
}

fn build_geometry(grid: Grid, params: &MetricParams) -> Result<GeometryField> {
    GeometryField::new(grid, params).map_err(|e| e.in_stage("geometry"))
}

fn identity_check(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let grid = cfg.grid()?;
    let geo = build_geometry(grid, &cfg.metric)?;
    let u = cfg.data.packet(grid, cfg.data.carrier);
    let r = squaring_residual(&u, &geo, cfg.mass).map_err(|e| e.in_stage("squaring_residual"))?;
    let t = &cfg.thresholds;
    let limit = if geo.is_flat() {
        t.flat_residual
    } else {
        t.curved_residual
    };
    report.checks.push(Check::at_most("squaring_residual", r.res1.max(r.res2), limit));
    report.checks.push(Check::at_most(
        "decomposition_agreement",
        (r.res1 - r.res2).abs(),
        t.residual_agreement,
    ));
    report.diagnostics.insert("projection_residual".into(), geo.projection_residual);
    report.diagnostics.insert("hermiticity_defect".into(), geo.hermiticity_defect);
    report.diagnostics.insert("antisymmetry_defect".into(), geo.antisymmetry_defect);
    report.residuals.push(ResidualEntry { n: grid.n, residual: r });
    Ok(())
}

/// `-slope` of `log residual` against `log N`.
pub fn fitted_order(ns: &[usize], residuals: &[f64]) -> f64 {
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    -cov / var
}

fn convergence(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let mut ns = cfg.grid.refinements.clone();
    ns.sort_unstable();
    let mut worst_agreement = 0.0f64;
    for &n in &ns {
        let grid = Grid::new(cfg.grid.half_width, n)?;
        let geo = build_geometry(grid, &cfg.metric)?;
        let u = cfg.data.packet(grid, cfg.data.carrier);
        let r = squaring_residual(&u, &geo, cfg.mass).map_err(|e| e.in_stage(format!("squaring_residual N={n}")))?;
        worst_agreement = worst_agreement.max((r.res1 - r.res2).abs());
        report.residuals.push(ResidualEntry { n, residual: r });
    }
    let res: Vec<f64> = report.residuals.iter().map(|r| r.residual.res2).collect();
    let t = &cfg.thresholds;
    if cfg.metric.is_flat() {
        let worst = res.iter().copied().fold(0.0, f64::max);
        report.checks.push(Check::at_most("flat_squaring_residual", worst, t.flat_residual));
    } else {
        report.checks.push(Check::at_least("convergence_order", fitted_order(&ns, &res), t.convergence_order));
    }
    report.checks.push(Check::at_most("decomposition_agreement", worst_agreement, t.residual_agreement));
    Ok(())
}

struct Dumps {
    dir: Option<PathBuf>,
    stride: usize,
}

impl Dumps {
    fn maybe_write(&self, tag: &str, index: usize, t: f64, u: &SpinorField) -> Result<()> {
        match &self.dir {
            Some(dir) if self.stride > 0 && index % self.stride == 0 => {
                write_field_dump(u, t, &dir.join(format!("{tag}_{index:05}")))
            }
            _ => Ok(()),
        }
    }
}

/// Samples `e^{itD_m}u0` at `MIN_TIME_SAMPLES + 1` or more uniform times
/// on `[0, t_final]`: exact propagator when flat, RK4 with dense output
/// otherwise.
pub fn sample_dirac_flow(
    u0: &SpinorField,
    geo: &GeometryField,
    m: f64,
    t_final: f64,
    dt: f64,
    sink: &mut dyn FnMut(usize, f64, &SpinorField) -> Result<()>,
) -> Result<()> {
    if geo.is_flat() {
        let intervals = MIN_TIME_SAMPLES.max((t_final / dt).ceil() as usize);
        for i in 0..=intervals {
            let t = t_final * i as f64 / intervals as f64;
            sink(i, t, &flat_dirac_propagator(u0, geo, m, t)?)?;
        }
        return Ok(());
    }
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let substeps = MIN_TIME_SAMPLES.div_ceil(steps);
    let opts = EvolveOptions {
        keep_stride: 0,
        ..EvolveOptions::default()
    };
    let mut failure = None;
    let mut index = 0;
    {
        let mut obs = dense_output(substeps, |t, u: &SpinorField| {
            if failure.is_none() {
                if let Err(e) = sink(index, t, u) {
                    failure = Some(e);
                }
            }
            index += 1;
        });
        evolve_dirac_with(u0, geo, m, t_final, dt, &opts, &mut obs)?;
    }
    failure.map_or(Ok(()), Err)
}

/// `e^{it√(m² - Δ)}f` on the flat grid.
fn flat_half_wave(f: &SpinorField, geo: &GeometryField, m: f64, t: f64) -> SpinorField {
    let spec = geo.spectral();
    apply_multiplier(f, |mode| {
        Complex64::from_polar(1.0, t * (m * m + spec.laplacian_symbol(mode)).sqrt())
    })
}

fn sweep_factor(ratios: &[f64]) -> f64 {
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn push_sweep_checks(report: &mut RunReport, label: &str, reports: &[NormReport], factor: f64) {
    report.checks.push(Check::at_least(
        format!("{label}_all_finite"),
        reports.iter().all(NormReport::is_finite) as u8 as f64,
        1.0,
    ));
    if reports.len() > 1 {
        let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
        report.checks.push(Check::at_most(format!("{label}_sweep_factor"), sweep_factor(&ratios), factor));
    }
}

fn push_flat_comparison(report: &mut RunReport, label: &str, curved: &[NormReport], flat: &[NormReport], factor: f64) {
    for (c, f) in curved.iter().zip(flat) {
        report.checks.push(Check::within_factor(format!("{label}_curved_over_flat"), c.ratio / f.ratio, factor));
    }
}

fn geometries(cfg: &ExperimentConfig) -> Result<Vec<GeometryField>> {
    let grid = cfg.grid()?;
    let mut out = vec![build_geometry(grid, &cfg.metric)?];
    if cfg.compare_flat && !cfg.metric.is_flat() {
        out.push(GeometryField::flat(grid));
    }
    Ok(out)
}

fn smoothing(cfg: &ExperimentConfig, report: &mut RunReport, dumps: &Dumps) -> Result<()> {
    let geos = geometries(cfg)?;
    let mut per_geo = Vec::new();
    for (gi, geo) in geos.iter().enumerate() {
        let mut dirac = Vec::new();
        let mut wave = Vec::new();
        for (ci, k) in cfg.data.carriers().into_iter().enumerate() {
            let u0 = cfg.data.packet(*geo.grid(), k);
            let mut acc = LocalSmoothing::new(&u0, geo, cfg.mass, cfg.eps)?;
            let tag = format!("smoothing_g{gi}_c{ci}");
            sample_dirac_flow(&u0, geo, cfg.mass, cfg.time.t_final, cfg.time.dt, &mut |i, t, u| {
                dumps.maybe_write(&tag, i, t, u)?;
                acc.observe(t, u)
            })
            .map_err(|e| e.in_stage("local_smoothing"))?;
            dirac.push(acc.finish());
            if cfg.half_wave {
                wave.push(half_wave_smoothing(cfg, geo, &u0).map_err(|e| e.in_stage("half_wave_smoothing"))?);
            }
        }
        per_geo.push((dirac, wave));
    }
    let t = &cfg.thresholds;
    push_sweep_checks(report, "local_smoothing", &per_geo[0].0, t.sweep_factor);
    if cfg.half_wave {
        push_sweep_checks(report, "half_wave_smoothing", &per_geo[0].1, t.sweep_factor);
    }
    if let Some((flat_dirac, flat_wave)) = per_geo.get(1) {
        push_sweep_checks(report, "flat_local_smoothing", flat_dirac, t.sweep_factor);
        push_flat_comparison(report, "local_smoothing", &per_geo[0].0, flat_dirac, t.flat_comparison_factor);
        if cfg.half_wave {
            push_flat_comparison(report, "half_wave_smoothing", &per_geo[0].1, flat_wave, t.flat_comparison_factor);
        }
    }
    for (dirac, wave) in per_geo {
        report.norms.extend(dirac);
        report.norms.extend(wave);
    }
    Ok(())
}

/// Half-wave flow `e^{it√(m² - Δ̃_h)}f`: exact on flat grids, otherwise the
/// wave equation with velocity `i√(m² - Δ)f` from the flat multiplier.
fn half_wave_smoothing(cfg: &ExperimentConfig, geo: &GeometryField, f: &SpinorField) -> Result<NormReport> {
    let m = cfg.mass;
    let mut acc = WaveSmoothing::new(f, geo, m, cfg.eps)?;
    if geo.is_flat() {
        for i in 0..=MIN_TIME_SAMPLES {
            let t = cfg.time.t_final * i as f64 / MIN_TIME_SAMPLES as f64;
            acc.observe(t, &flat_half_wave(f, geo, m, t))?;
        }
        return Ok(acc.finish());
    }
    let u1 = crate::evolution::half_wave_velocity(f, geo, m);
    let steps = ((cfg.time.t_final / cfg.time.dt) - 1e-9).ceil().max(1.0) as usize;
    let substeps = MIN_TIME_SAMPLES.div_ceil(steps);
    let opts = EvolveOptions {
        keep_stride: 0,
        ..EvolveOptions::default()
    };
    let mut failure = None;
    {
        let mut obs = dense_output(substeps, |t, u: &SpinorField| {
            if failure.is_none() {
                failure = acc.observe(t, u).err();
            }
        });
        crate::evolution::evolve_scalar_wave_with(f, &u1, geo, m, cfg.time.t_final, cfg.time.dt, &opts, &mut obs)?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(acc.finish())
}

fn strichartz(cfg: &ExperimentConfig, report: &mut RunReport, dumps: &Dumps) -> Result<()> {
    let geos = geometries(cfg)?;
    let m = cfg.mass;
    let mut runnable = Vec::new();
    for triple in &cfg.triples {
        let u0 = cfg.data.packet(geos[0].grid().to_owned(), cfg.data.carrier);
        match Strichartz::new(&u0, &geos[0], *triple, m) {
            Ok(_) => runnable.push(*triple),
            Err(Error::ExcludedEndpoint) => {
                // the estimate does not cover q = 2; record the rejection
                report.checks.push(Check::at_least("massive_endpoint_rejected", 1.0, 1.0));
            }
            Err(e) => return Err(e.in_stage("strichartz")),
        }
    }
    // per geometry, per triple, per carrier
    let mut results: Vec<Vec<Vec<NormReport>>> = Vec::new();
    for (gi, geo) in geos.iter().enumerate() {
        let mut by_triple: Vec<Vec<NormReport>> = vec![Vec::new(); runnable.len()];
        for (ci, k) in cfg.data.carriers().into_iter().enumerate() {
            let u0 = cfg.data.packet(*geo.grid(), k);
            let mut accs = runnable
                .iter()
                .map(|t| Strichartz::new(&u0, geo, *t, m))
                .collect::<Result<Vec<_>>>()?;
            let tag = format!("strichartz_g{gi}_c{ci}");
            sample_dirac_flow(&u0, geo, m, cfg.time.t_final, cfg.time.dt, &mut |i, t, u| {
                dumps.maybe_write(&tag, i, t, u)?;
                accs.iter_mut().try_for_each(|a| a.observe(t, u))
            })
            .map_err(|e| e.in_stage("strichartz"))?;
            for (slot, acc) in by_triple.iter_mut().zip(accs) {
                slot.push(acc.finish());
            }
        }
        results.push(by_triple);
    }
    let t = &cfg.thresholds;
    for (ti, triple) in runnable.iter().enumerate() {
        let label = format!(
            "strichartz_{}_{:.4}_{}_{}",
            match triple.kind {
                TripleKind::Wave => "wave",
                TripleKind::KleinGordon => "kg",
            },
            triple.s,
            triple.q,
            triple.r
        );
        // massive estimates are inhomogeneous; the sweep is only scale
        // invariant without mass
        let factor = if m == 0.0 { t.sweep_factor } else { f64::INFINITY };
        push_sweep_checks(report, &label, &results[0][ti], factor);
        if let Some(flat) = results.get(1) {
            push_flat_comparison(report, &label, &results[0][ti], &flat[ti], t.flat_comparison_factor);
        }
    }
    for by_triple in results {
        for reports in by_triple {
            report.norms.extend(reports);
        }
    }
    Ok(())
}

/// Seeded smooth field: three Gaussian packets with random centres,
/// widths, carriers and spinor coefficients, cut off smoothly at `L/2`.
pub fn random_tapered_field(grid: Grid, seed: u64) -> SpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.half_width;
    let taper = Taper {
        inner: 0.5 * l,
        outer: l - 2.0 * grid.spacing(),
    };
    let mut total = SpinorField::zeros(grid);
    for _ in 0..3 {
        let center: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.2 * l..0.2 * l));
        let width = rng.gen_range(0.08 * l..0.18 * l);
        let carrier: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.5..1.5));
        let coeffs: [Complex64; 4] =
            std::array::from_fn(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        for (c, coeff) in coeffs.iter().enumerate() {
            let packet = wavepacket(grid, center, width, carrier, c);
            total.add_scaled(*coeff, &packet);
        }
    }
    let n3 = grid.len();
    let data = total.data_mut();
    for p in 0..n3 {
        let w = taper.value(grid.point(p));
        for c in 0..4 {
            data[c * n3 + p] *= w;
        }
    }
    total
}

fn norm_equivalence(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let grid = cfg.grid()?;
    let geo = build_geometry(grid, &cfg.metric)?;
    let m = cfg.mass;
    let results: Vec<Result<_>> = (0..cfg.draws)
        .into_par_iter()
        .map(|i| {
            let u = random_tapered_field(grid, cfg.seed.wrapping_add(i as u64));
            norm_equivalence_check(&u, &geo, m)
        })
        .collect();
    let mut worst: f64 = 1.0;
    let mut worst_flat_defect = 0.0f64;
    for r in results {
        let e = r.map_err(|e| e.in_stage("norm_equivalence"))?;
        for ratio in [e.ratio_multiplier(), e.ratio_quadratic()] {
            worst = worst.max(ratio).max(1.0 / ratio);
            worst_flat_defect = worst_flat_defect.max((ratio - 1.0).abs());
        }
        report.norms.extend(e.reports(&geo, m));
    }
    let t = &cfg.thresholds;
    report.checks.push(Check::at_most("equivalence_worst_factor", worst, t.equivalence_factor));
    if geo.is_flat() && m == 0.0 {
        report.checks.push(Check::at_most("flat_equivalence_defect", worst_flat_defect, t.flat_equivalence));
    }
    Ok(())
}

fn relative_error(a: &SpinorField, b: &SpinorField, geo: &GeometryField) -> f64 {
    norm_mh(&a.sub(b), geo) / norm_mh(b, geo)
}

fn wave_cross_check(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let grid = cfg.grid()?;
    let geo = build_geometry(grid, &cfg.metric)?;
    let m = cfg.mass;
    let (t_final, dt) = (cfg.time.t_final, cfg.time.dt);
    let u0 = cfg.data.packet(grid, cfg.data.carrier);
    let u1 = apply_dirac(&u0, &geo, m)?.scaled(IM);
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    // compare at about 20 evenly spaced times
    let opts = EvolveOptions {
        keep_stride: steps.div_ceil(20),
        ..EvolveOptions::default()
    };
    let forward = evolve_dirac_with(&u0, &geo, m, t_final, dt, &opts, &mut |_, _, _, _| {})
        .map_err(|e| e.in_stage("evolve_dirac"))?;
    let squared = evolve_squared_with(&u0, &u1, &geo, m, t_final, dt, &opts, &mut |_, _, _, _| {})
        .map_err(|e| e.in_stage("evolve_squared"))?;
    let h1 = sobolev_norm(&u0, &geo, 1.0, 2.0, false)?;
    let worst = forward
        .states
        .iter()
        .zip(&squared.states)
        .map(|(d, s)| norm_mh(&s.sub(d), &geo) / h1)
        .fold(0.0, f64::max);
    let back_opts = EvolveOptions {
        check_wraparound: false,
        ..opts
    };
    let backward = evolve_dirac_with(forward.final_state(), &geo, m, -t_final, -dt, &back_opts, &mut |_, _, _, _| {})
        .map_err(|e| e.in_stage("evolve_dirac backward"))?;
    let t = &cfg.thresholds;
    report.checks.push(Check::at_most("dirac_vs_squared", worst, t.cross_check));
    report.checks.push(Check::at_most("norm_drift", forward.meta.norm_drift(), t.norm_drift));
    report.checks.push(Check::at_most(
        "reversibility",
        relative_error(backward.final_state(), &u0, &geo),
        t.reversibility,
    ));
    Ok(())
}

pub struct ReportPaths {
    pub json: PathBuf,
    pub csv: PathBuf,
}

impl ReportPaths {
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        Self {
            json: dir.join(format!("{stem}.json")),
            csv: dir.join(format!("{stem}.csv")),
        }
    }
}

/// Writes the JSON report and a CSV with one row per `(t, functional)` sample.
pub fn emit_report(report: &RunReport, paths: &ReportPaths) -> Result<()> {
    for p in [&paths.json, &paths.csv] {
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(&paths.json, json)?;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&paths.csv)?);
    writeln!(csv, "report,functional,sample,t,value")?;
    for (i, n) in report.norms.iter().enumerate() {
        for (j, s) in n.samples.iter().enumerate() {
            writeln!(csv, "{i},{},{j},{:e},{:e}", n.functional, s.t, s.value)?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDumpHeader {
    /// `[components, n, n, n]`.
    pub shape: [usize; 4],
    pub dtype: String,
    pub order: String,
    pub half_width: f64,
    pub t: f64,
}

/// Raw little-endian complex64 field at `<stem>.bin` with a JSON sidecar
/// at `<stem>.json`; component-major, z fastest.
pub fn write_field_dump(u: &SpinorField, t: f64, stem: &Path) -> Result<()> {
    if let Some(parent) = stem.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let grid = u.grid();
    let mut bytes = Vec::with_capacity(u.data().len() * 8);
    for z in u.data() {
        bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    std::fs::write(stem.with_extension("bin"), bytes)?;
    let header = FieldDumpHeader {
        shape: [4, grid.n, grid.n, grid.n],
        dtype: "complex64".into(),
        order: "component-major, z-fastest".into(),
        half_width: grid.half_width,
        t,
    };
    std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_field_dump(stem: &Path) -> Result<(FieldDumpHeader, SpinorField)> {
    let header: FieldDumpHeader = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    let bytes = std::fs::read(stem.with_extension("bin"))?;
    let grid = Grid::new(header.half_width, header.shape[1])?;
    if bytes.len() != 8 * 4 * grid.len() {
        return Err(config_error("field dump size does not match its header"));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok((header, SpinorField::from_raw(grid, data)))
}

/// Process exit code for a finished run.
pub fn exit_code(result: &Result<RunReport>) -> i32 {
    match result {
        Ok(r) if r.passed => 0,
        Err(e) if e.is_config() => 2,
        _ => 1,
    }
}
