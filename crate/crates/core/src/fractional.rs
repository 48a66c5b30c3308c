//! Time-direction operator calculus: Hilbert transform, half derivative,
//! full time derivative, smooth dyadic cutoffs and their commutator.
//!
//! All three symbols vanish on the Nyquist mode `k = -n_t/2`, and `sgn(0) = 0`,
//! so `H∘H = -I`, `D½∘D½ = H∘∂_t` and the adjoint relations hold exactly on
//! the lattice.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::spectrum::{apply_time_multiplier, mode_of_bin};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    Hilbert,
    HalfDerivative,
    TimeDerivative,
}

/// Per-mode multipliers in FFT bin order.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSymbol {
    kind: SymbolKind,
    values: Vec<Complex64>,
}

impl TimeSymbol {
    pub fn new(kind: SymbolKind, grid: &Grid) -> Self {
        let n = grid.n_t();
        let values = (0..n)
            .map(|bin| {
                let k = mode_of_bin(bin, n);
                if k == -(n as i64) / 2 {
                    return Complex64::default();
                }
                let w = 2.0 * PI * k as f64 / grid.l_t();
                match kind {
                    SymbolKind::Hilbert => Complex64::new(0.0, -(k.signum() as f64)),
                    SymbolKind::HalfDerivative => Complex64::new(-w.abs().sqrt(), 0.0),
                    SymbolKind::TimeDerivative => Complex64::new(0.0, w),
                }
            })
            .collect();
        Self { kind, values }
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    /// Multiplier of mode `k ∈ [-n_t/2, n_t/2)`.
    pub fn at(&self, k: i64) -> Complex64 {
        let n = self.values.len() as i64;
        self.values[k.rem_euclid(n) as usize]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn apply(&self, field: &Field) -> Field {
        apply_time_multiplier(field, &self.values)
    }
}

pub fn hilbert(field: &Field) -> Field {
    TimeSymbol::new(SymbolKind::Hilbert, field.grid()).apply(field)
}

pub fn half_derivative(field: &Field) -> Field {
    TimeSymbol::new(SymbolKind::HalfDerivative, field.grid()).apply(field)
}

pub fn time_derivative(field: &Field) -> Field {
    TimeSymbol::new(SymbolKind::TimeDerivative, field.grid()).apply(field)
}

/// Removes the time mean and the time-Nyquist mode at every spatial point.
pub fn project_mean_nyquist_free(field: &Field) -> Field {
    let n = field.grid().n_t();
    let mult: Vec<Complex64> = (0..n)
        .map(|bin| {
            if bin == 0 || bin == n / 2 {
                Complex64::default()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    apply_time_multiplier(field, &mult)
}

/// Removes only the time-Nyquist mode.
pub fn project_nyquist_free(field: &Field) -> Field {
    let n = field.grid().n_t();
    let mult: Vec<Complex64> = (0..n)
        .map(|bin| Complex64::new(if bin == n / 2 { 0.0 } else { 1.0 }, 0.0))
        .collect();
    apply_time_multiplier(field, &mult)
}

/// Direct quadrature of the singular-integral form
/// `D½φ(t) = (8π)^{-1/2} ∫ (φ(t+ℓ) - φ(t)) |ℓ|^{-3/2} dℓ`.
///
/// Lattice nodes `ℓ = j·dt`, `1 ≤ |j| ≤ truncation_periods·n_t`, carry weight `dt`.
/// The central cell `|ℓ| < dt/2` contributes `φ''·(2/3)(dt/2)^{3/2}` with a
/// centred second difference for `φ''`. Beyond the truncation radius `T` the
/// `-φ(t)` part integrates in closed form to `-4φ(t)/√T`; the mean of the
/// `φ(t+ℓ)` part is added back the same way so constants map to zero.
pub fn half_derivative_quadrature(field: &Field, truncation_periods: usize) -> Result<Field> {
    if truncation_periods < 1 {
        return Err(Error::InvalidArgument(
            "truncation_periods must be at least 1".into(),
        ));
    }
    let grid = field.grid();
    let n = grid.n_t();
    let dt = grid.dt();
    let jmax = truncation_periods * n;

    // Fold the symmetric kernel weights onto one period.
    let mut folded = vec![0.0; n];
    let mut total = 0.0;
    for j in 1..=jmax {
        let w = dt / (j as f64 * dt).powf(1.5);
        folded[j % n] += w;
        folded[(n - j % n) % n] += w;
        total += 2.0 * w;
    }
    let radius = (jmax as f64 + 0.5) * dt;
    let far = 4.0 / radius.sqrt();
    let central = (2.0 / 3.0) * (dt / 2.0).powf(1.5) / (dt * dt);
    let norm = 1.0 / (8.0 * PI).sqrt();

    let s_len = grid.spatial_len();
    let data = field.data();
    let mut out = vec![0.0; grid.len()];
    let mut line = vec![0.0; n];
    for s in 0..s_len {
        for (m, v) in line.iter_mut().enumerate() {
            *v = data[m * s_len + s];
        }
        let mean = line.iter().sum::<f64>() / n as f64;
        for m in 0..n {
            let phi = line[m];
            let mut acc = 0.0;
            for (r, w) in folded.iter().enumerate() {
                acc += w * line[(m + r) % n];
            }
            acc -= total * phi;
            let second = line[(m + 1) % n] - 2.0 * phi + line[(m + n - 1) % n];
            acc += central * second;
            acc -= far * (phi - mean);
            out[m * s_len + s] = norm * acc;
        }
    }
    Field::from_vec(grid, out)
}

/// `‖D½u‖_p / (‖∂_t u‖_p + ‖u‖_p)`; `None` when the denominator vanishes.
pub fn half_derivative_norm_ratio(field: &Field, p: f64) -> Result<Option<f64>> {
    let num = half_derivative(field).lp_norm(p)?;
    let den = time_derivative(field).lp_norm(p)? + field.lp_norm(p)?;
    Ok((den > 0.0).then(|| num / den))
}

/// Quintic smoothstep `6s⁵ - 15s⁴ + 10s³` clamped to `[0, 1]`.
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

/// `η_k(t)`: one on `|t| ≤ 2^k`, zero on `|t| ≥ 2^{k+1}`, quintic ramp between.
pub fn eta(k: u32, t: f64) -> f64 {
    let inner = 2f64.powi(k as i32);
    1.0 - smoothstep((t.abs() - inner) / inner)
}

/// `∂_t η_k(t)`.
pub fn eta_derivative(k: u32, t: f64) -> f64 {
    let inner = 2f64.powi(k as i32);
    let s = (t.abs() - inner) / inner;
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    -t.signum() * 30.0 * s * s * (1.0 - s) * (1.0 - s) / inner
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffProfile {
    pub k: u32,
    /// `η_k(t_m)` for every time sample.
    pub values: Vec<f64>,
    /// Analytic `max |∂_t η_k| = (15/8)·2^{-k}`.
    pub derivative_bound: f64,
}

impl CutoffProfile {
    /// The profile broadcast over all spatial samples.
    pub fn to_field(&self, grid: &Grid) -> Field {
        let s = grid.spatial_len();
        let data = self
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, s))
            .collect();
        Field::from_vec_unchecked(grid, data)
    }
}

pub fn cutoff_eta(k: u32, grid: &Grid) -> Result<CutoffProfile> {
    let outer = 2f64.powi(k as i32 + 1);
    let half_period = grid.l_t() / 2.0;
    if k > 60 || outer >= half_period {
        return Err(Error::CutoffDoesNotFit {
            level: k,
            outer,
            half_period,
        });
    }
    let values = (0..grid.n_t()).map(|m| eta(k, grid.time_coord(m))).collect();
    Ok(CutoffProfile {
        k,
        values,
        derivative_bound: 1.875 * 2f64.powi(-(k as i32)),
    })
}

/// `u_k = D½(u η_k) - η_k D½u`.
pub fn cutoff_commutator(u: &Field, k: u32) -> Result<Field> {
    let eta = cutoff_eta(k, u.grid())?.to_field(u.grid());
    let prod = u.mul(&eta)?;
    let lhs = half_derivative(&prod);
    let rhs = eta.mul(&half_derivative(u))?;
    Ok(&lhs - &rhs)
}
