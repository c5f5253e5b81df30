//! Periodic Cartesian grid and Fourier machinery.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `[-L, L)³` sampled with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half_width: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!("grid half width must be positive, got {half_width}")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::Config(format!("grid size must be even and >= 4, got {n}")));
        }
        Ok(Self { half_width, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    pub fn point(&self, node: usize) -> [f64; 3] {
        let n = self.n;
        [self.coord(node / (n * n)), self.coord((node / n) % n), self.coord(node % n)]
    }

    /// Signed FFT index in `{-n/2, …, n/2 - 1}`.
    pub fn signed_mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Angular wavenumber `(π/L)·mode`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        std::f64::consts::PI / self.half_width * self.signed_mode(i) as f64
    }

    /// Wavenumber used for first derivatives: the Nyquist mode is zeroed.
    pub fn derivative_wavenumber(&self, i: usize) -> f64 {
        if i == self.n / 2 {
            0.0
        } else {
            self.wavenumber(i)
        }
    }

    /// Largest resolved wavenumber `π/Δx`.
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }
}

/// FFT plans and wavenumber tables for one grid.
pub struct Spectral {
    pub grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Derivative wavenumbers per axis index.
    kd: Vec<f64>,
    /// Full wavenumbers per axis index (Nyquist kept, negative).
    kf: Vec<f64>,
}

type SpectralCache = Mutex<HashMap<(u64, usize), Arc<Spectral>>>;

fn cache() -> &'static SpectralCache {
    static CACHE: OnceLock<SpectralCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n;
        Self {
            grid,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            kd: (0..n).map(|i| grid.derivative_wavenumber(i)).collect(),
            kf: (0..n).map(|i| grid.wavenumber(i)).collect(),
        }
    }

    /// Shared instance for `grid`.
    pub fn for_grid(grid: Grid) -> Arc<Spectral> {
        let key = (grid.half_width.to_bits(), grid.n);
        let mut map = cache().lock().expect("spectral cache poisoned");
        map.entry(key).or_insert_with(|| Arc::new(Spectral::new(grid))).clone()
    }

    pub fn derivative_wavenumbers(&self) -> &[f64] {
        &self.kd
    }

    /// `Σ_i k_i²` with derivative wavenumbers: the symbol of `-Δ` as
    /// realised by two spectral first derivatives.
    pub fn laplacian_symbol(&self, mode: usize) -> f64 {
        let n = self.grid.n;
        let (a, b, c) = (mode / (n * n), (mode / n) % n, mode % n);
        self.kd[a] * self.kd[a] + self.kd[b] * self.kd[b] + self.kd[c] * self.kd[c]
    }

    /// `|ξ|²` with the full lattice wavenumbers.
    pub fn full_symbol(&self, mode: usize) -> f64 {
        let n = self.grid.n;
        let (a, b, c) = (mode / (n * n), (mode / n) % n, mode % n);
        self.kf[a] * self.kf[a] + self.kf[b] * self.kf[b] + self.kf[c] * self.kf[c]
    }

    pub fn mode_wavevector(&self, mode: usize) -> [f64; 3] {
        let n = self.grid.n;
        [self.kd[mode / (n * n)], self.kd[(mode / n) % n], self.kd[mode % n]]
    }

    /// Largest `|signed index|` over the three axes of `mode`.
    pub fn mode_extent(&self, mode: usize) -> usize {
        let n = self.grid.n;
        let g = &self.grid;
        [mode / (n * n), (mode / n) % n, mode % n]
            .iter()
            .map(|&i| g.signed_mode(i).unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/n³` normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// 3-D transform of every consecutive `n³` block of `data`.
    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let n3 = n * n * n;
        assert_eq!(data.len() % n3, 0, "buffer is not a stack of n³ blocks");
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for block in data.chunks_mut(n3) {
            // z: contiguous lines
            fft.process_with_scratch(block, &mut scratch);
            // y: transpose each x-plane
            for plane in block.chunks_mut(n * n) {
                for iy in 0..n {
                    for iz in 0..n {
                        buf[iz * n + iy] = plane[iy * n + iz];
                    }
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for iy in 0..n {
                    for iz in 0..n {
                        plane[iy * n + iz] = buf[iz * n + iy];
                    }
                }
            }
            // x: gather (iz, ix) slabs for each iy
            for iy in 0..n {
                for ix in 0..n {
                    let base = (ix * n + iy) * n;
                    for iz in 0..n {
                        buf[iz * n + ix] = block[base + iz];
                    }
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for ix in 0..n {
                    let base = (ix * n + iy) * n;
                    for iz in 0..n {
                        block[base + iz] = buf[iz * n + ix];
                    }
                }
            }
        }
    }
}
