//! Time and space-time Fourier transforms on the periodic lattice.
//!
//! The continuous convention is `û(ξ) = (2π)^{-1/2} ∫ e^{-iξt} u(t) dt`.
//! On the lattice the mode `k` has frequency `ξ_k = 2πk/l_t` and the
//! coefficient is `dt/√(2π) · e^{-iξ_k t_0} · FFT_k` where `t_0 = -l_t/2`
//! is the first sample time. With this scaling the discrete Parseval
//! identity reads `‖u‖² = Δξ Σ_k |û_k|²` (times the spatial cell measure).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Field, Grid};

static PLANS: LazyLock<Mutex<PlanCache>> = LazyLock::new(|| {
    Mutex::new(PlanCache {
        planner: FftPlanner::new(),
        plans: HashMap::new(),
    })
});

struct PlanCache {
    planner: FftPlanner<f64>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLANS.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(p) = cache.plans.get(&(n, inverse)) {
        return p.clone();
    }
    let p = if inverse {
        cache.planner.plan_fft_inverse(n)
    } else {
        cache.planner.plan_fft_forward(n)
    };
    cache.plans.insert((n, inverse), p.clone());
    p
}

/// Signed mode number of FFT bin `j` out of `n`; the Nyquist bin maps to `-n/2`.
pub fn mode_of_bin(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

pub fn bin_of_mode(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

const TILE: usize = 64;

/// Unnormalized FFT along one axis of a row-major array of the given shape.
pub(crate) fn fft_axis(buf: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let fft = plan(n, inverse);
    if stride == 1 {
        fft.process(buf);
        return;
    }
    let block = n * stride;
    let mut scratch = vec![Complex64::default(); n * TILE.min(stride)];
    for chunk in buf.chunks_exact_mut(block) {
        let mut i0 = 0;
        while i0 < stride {
            let w = TILE.min(stride - i0);
            let lines = &mut scratch[..n * w];
            for m in 0..n {
                let row = &chunk[m * stride + i0..m * stride + i0 + w];
                for (c, v) in row.iter().enumerate() {
                    lines[c * n + m] = *v;
                }
            }
            fft.process(lines);
            for m in 0..n {
                let row = &mut chunk[m * stride + i0..m * stride + i0 + w];
                for (c, v) in row.iter_mut().enumerate() {
                    *v = lines[c * n + m];
                }
            }
            i0 += w;
        }
    }
}

/// FFT over every axis; the inverse is normalized so the round trip is the identity.
pub(crate) fn fft_all(buf: &mut [Complex64], shape: &[usize], inverse: bool) {
    for axis in 0..shape.len() {
        fft_axis(buf, shape, axis, inverse);
    }
    if inverse {
        let s = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
}

pub(crate) fn to_complex(data: &[f64]) -> Vec<Complex64> {
    data.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// `(time samples, spatial samples)` view used by the time-only transforms.
fn time_shape(grid: &Grid) -> [usize; 2] {
    [grid.n_t(), grid.spatial_len()]
}

/// Multiplies every time mode (FFT bin order) by `mult[bin]` and returns the real part.
pub fn apply_time_multiplier(field: &Field, mult: &[Complex64]) -> Field {
    let grid = field.grid();
    debug_assert_eq!(mult.len(), grid.n_t());
    let shape = time_shape(grid);
    let mut buf = to_complex(field.data());
    fft_axis(&mut buf, &shape, 0, false);
    let s = shape[1];
    let norm = 1.0 / grid.n_t() as f64;
    for (j, row) in buf.chunks_exact_mut(s).enumerate() {
        let m = mult[j] * norm;
        row.iter_mut().for_each(|v| *v *= m);
    }
    fft_axis(&mut buf, &shape, 0, true);
    Field::from_vec_unchecked(grid, buf.into_iter().map(|v| v.re).collect())
}

/// Time-Fourier coefficients of a field, one per (time mode, spatial sample).
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSpectrum {
    grid: Grid,
    /// Bin-major: `coeffs[bin * S + s]`.
    coeffs: Vec<Complex64>,
}

impl TimeSpectrum {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn frequency(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.grid.l_t()
    }

    /// Coefficient of mode `k ∈ [-n_t/2, n_t/2)` at spatial sample `s`.
    pub fn coeff(&self, k: i64, s: usize) -> Complex64 {
        let bin = bin_of_mode(k, self.grid.n_t());
        self.coeffs[bin * self.grid.spatial_len() + s]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `Δξ · Σ |û|² · Π h_i`, equal to `‖u‖₂²` for the originating field.
    pub fn parseval_energy(&self) -> f64 {
        let dxi = 2.0 * PI / self.grid.l_t();
        let hs = self.grid.cell_measure() / self.grid.dt();
        dxi * hs * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Largest `|û(k) - conj(û(-k))|` over non-Nyquist modes.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n_t() as i64;
        let s_len = self.grid.spatial_len();
        let mut worst = 0.0f64;
        for k in (1 - n / 2)..(n / 2) {
            for s in 0..s_len {
                let d = (self.coeff(k, s) - self.coeff(-k, s).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

fn phase_scale(grid: &Grid, bin: usize) -> Complex64 {
    // e^{-iξ t0} with t0 = -l_t/2 is (-1)^k.
    let k = mode_of_bin(bin, grid.n_t());
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Complex64::new(sign * grid.dt() / (2.0 * PI).sqrt(), 0.0)
}

pub fn transform_time(field: &Field) -> TimeSpectrum {
    let grid = *field.grid();
    let shape = time_shape(&grid);
    let mut buf = to_complex(field.data());
    fft_axis(&mut buf, &shape, 0, false);
    for (bin, row) in buf.chunks_exact_mut(shape[1]).enumerate() {
        let c = phase_scale(&grid, bin);
        row.iter_mut().for_each(|v| *v *= c);
    }
    TimeSpectrum { grid, coeffs: buf }
}

/// Inverse of [`transform_time`]; the imaginary part (zero for Hermitian input) is dropped.
pub fn inverse_transform_time(spectrum: &TimeSpectrum) -> Field {
    let grid = spectrum.grid;
    let shape = time_shape(&grid);
    let mut buf = spectrum.coeffs.clone();
    let n = grid.n_t() as f64;
    for (bin, row) in buf.chunks_exact_mut(shape[1]).enumerate() {
        let c = 1.0 / (phase_scale(&grid, bin) * n);
        row.iter_mut().for_each(|v| *v *= c);
    }
    fft_axis(&mut buf, &shape, 0, true);
    Field::from_vec_unchecked(&grid, buf.into_iter().map(|v| v.re).collect())
}
