//! Weak forms, the constant-coefficient Fourier oracle and the preconditioned
//! Krylov solver for `P_λ u = D½h + D⁻_i g_i + f`.
//!
//! Per space-time mode the discrete operator has symbol
//! `L = iτ♯ + Σ_ij a_ij σ̄_i σ_j + λ`, where `σ_i = (e^{iξ_i h_i} - 1)/h_i` is the
//! forward-difference symbol and `τ♯` the Nyquist-zeroed time frequency.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional::{half_derivative, hilbert};
use crate::grid::{bundle_lp_norm, Field, Grid};
use crate::krylov::{gmres, GmresOptions};
use crate::operator::{
    apply_operator, apply_rhs, gradient_plus, Coefficients, DataBundle, SolutionBundle,
    StructureTag,
};
use crate::spectrum::{fft_all, mode_of_bin, to_complex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    ConstantMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub preconditioner: Preconditioner,
    /// `None` means `δ²/2`.
    pub kappa: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            max_iterations: 500,
            restart: 40,
            preconditioner: Preconditioner::ConstantMean,
            kappa: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self, delta: f64) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::InvalidArgument(format!("rtol must lie in (0, 1), got {}", self.rtol)));
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k <= delta) {
                return Err(Error::InvalidArgument(format!("kappa must lie in (0, delta], got {k}")));
            }
        }
        if self.restart == 0 {
            return Err(Error::InvalidArgument("restart must be positive".into()));
        }
        Ok(())
    }

    pub fn kappa_for(&self, delta: f64) -> f64 {
        self.kappa.unwrap_or(delta * delta / 2.0)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub bundle: SolutionBundle,
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub residual_history: Vec<f64>,
    pub wall_time: Duration,
}

/// `∫ -H(D½u) D½φ + a_ij D⁺_j u D⁺_i φ + λuφ`.
pub fn weak_pairing(coeffs: &Coefficients, lambda: f64, u: &Field, phi: &Field) -> Result<f64> {
    u.same_grid(phi)?;
    let hu = half_derivative(u);
    let hphi = half_derivative(phi);
    let time = -hilbert(&hu).inner(&hphi)?;
    let flux = coeffs.apply(&gradient_plus(u))?;
    let space = flux.inner(&gradient_plus(phi))?;
    Ok(time + space + lambda * u.inner(phi)?)
}

/// `B_κ[u, v] = ⟨P_λ u, (1 - κH) v⟩` in weak form.
pub fn bilinear_b_kappa(
    coeffs: &Coefficients,
    lambda: f64,
    kappa: f64,
    u: &Field,
    v: &Field,
) -> Result<f64> {
    let twisted = v.axpy(-kappa, &hilbert(v))?;
    weak_pairing(coeffs, lambda, u, &twisted)
}

/// Per-axis mode symbols of the discretization.
struct ModeSymbols {
    shape: Vec<usize>,
    /// `τ♯` per time bin.
    tau: Vec<f64>,
    /// `-|τ♯|^{1/2}` per time bin.
    half: Vec<f64>,
    /// `σ_a` per spatial axis and bin.
    sigma: Vec<Vec<Complex64>>,
}

impl ModeSymbols {
    fn new(grid: &Grid) -> Self {
        let n = grid.n_t();
        let tau: Vec<f64> = (0..n)
            .map(|b| {
                let k = mode_of_bin(b, n);
                if k == -(n as i64) / 2 {
                    0.0
                } else {
                    2.0 * PI * k as f64 / grid.l_t()
                }
            })
            .collect();
        let half = tau.iter().map(|t| -t.abs().sqrt()).collect();
        let sigma = (0..grid.d())
            .map(|a| {
                let (na, h) = (grid.n_x(a), grid.h(a));
                (0..na)
                    .map(|b| {
                        let xi = 2.0 * PI * mode_of_bin(b, na) as f64 / grid.l_x(a);
                        (Complex64::new(0.0, xi * h).exp() - 1.0) / h
                    })
                    .collect()
            })
            .collect();
        Self {
            shape: grid.shape(),
            tau,
            half,
            sigma,
        }
    }

    /// `σ` vector for spatial flat bin index `s`.
    fn sigma_at(&self, s: usize) -> Vec<Complex64> {
        let d = self.sigma.len();
        let mut out = vec![Complex64::default(); d];
        let mut rest = s;
        for a in (0..d).rev() {
            let n = self.shape[a + 1];
            out[a] = self.sigma[a][rest % n];
            rest /= n;
        }
        out
    }

    /// `Σ_ij a_ij σ̄_i σ_j` per spatial bin.
    fn spatial_part(&self, matrix: &[f64]) -> Vec<Complex64> {
        let d = self.sigma.len();
        let s_len: usize = self.shape[1..].iter().product();
        (0..s_len)
            .map(|s| {
                let sig = self.sigma_at(s);
                let mut acc = Complex64::default();
                for i in 0..d {
                    for j in 0..d {
                        acc += matrix[i * d + j] * sig[i].conj() * sig[j];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Constant-coefficient inverse `P⁻¹` realized mode by mode.
pub struct ConstantInverse {
    grid: Grid,
    /// `1/L` per mode, zero where `L = 0`.
    inv: Vec<Complex64>,
    singular: Vec<usize>,
}

impl ConstantInverse {
    pub fn new(grid: &Grid, matrix: &[f64], lambda: f64) -> Self {
        let modes = ModeSymbols::new(grid);
        let sp = modes.spatial_part(matrix);
        let s_len = sp.len();
        let mut inv = Vec::with_capacity(grid.len());
        let mut singular = Vec::new();
        for (bt, &tau) in modes.tau.iter().enumerate() {
            for (s, &a) in sp.iter().enumerate() {
                let l = Complex64::new(lambda, tau) + a;
                if l.norm() == 0.0 {
                    singular.push(bt * s_len + s);
                    inv.push(Complex64::default());
                } else {
                    inv.push(1.0 / l);
                }
            }
        }
        Self {
            grid: *grid,
            inv,
            singular,
        }
    }

    /// Divides a forward spectrum in place; fails if a singular mode carries data.
    fn divide(&self, buf: &mut [Complex64]) -> Result<()> {
        let scale = buf.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for &i in &self.singular {
            if buf[i].norm() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::SingularMode {
                    detail: format!(
                        "mode with spatial index 0 and time bin {} has data but zero symbol; lambda = 0 requires time-mean-free data",
                        i / self.grid.spatial_len()
                    ),
                });
            }
        }
        for (v, m) in buf.iter_mut().zip(&self.inv) {
            *v *= m;
        }
        Ok(())
    }

    pub fn apply(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let shape = self.grid.shape();
        let mut buf = to_complex(rhs);
        fft_all(&mut buf, &shape, false);
        self.divide(&mut buf)?;
        fft_all(&mut buf, &shape, true);
        Ok(buf.into_iter().map(|v| v.re).collect())
    }
}

fn require_constant(coeffs: &Coefficients) -> Result<Vec<f64>> {
    if coeffs.tag() != StructureTag::Constant {
        return Err(Error::InvalidArgument(
            "the Fourier oracle needs coefficients tagged constant".into(),
        ));
    }
    Ok(coeffs.matrix_at(0))
}

/// Exact constant-coefficient solve:
/// `û = (-|τ♯|^{1/2} ĥ - Σ σ̄_i ĝ_i + f̂) / (iτ♯ + Σ a_ij σ̄_i σ_j + λ)`.
pub fn solve_oracle(coeffs: &Coefficients, lambda: f64, data: &DataBundle) -> Result<SolveResult> {
    let start = Instant::now();
    let grid = *coeffs.grid();
    data.h.same_grid(&Field::zeros(&grid))?;
    let matrix = require_constant(coeffs)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    let shape = grid.shape();
    let modes = ModeSymbols::new(&grid);
    let s_len = grid.spatial_len();
    let spectrum = |f: &Field| {
        let mut b = to_complex(f.data());
        fft_all(&mut b, &shape, false);
        b
    };
    let mut rhs = spectrum(&data.f);
    let h = spectrum(&data.h);
    let gs: Vec<Vec<Complex64>> = data.g.components().iter().map(spectrum).collect();
    let sigmas: Vec<Vec<Complex64>> = (0..s_len).map(|s| modes.sigma_at(s)).collect();
    for (idx, r) in rhs.iter_mut().enumerate() {
        let (bt, s) = (idx / s_len, idx % s_len);
        *r += modes.half[bt] * h[idx];
        for (a, g) in gs.iter().enumerate() {
            *r -= sigmas[s][a].conj() * g[idx];
        }
    }
    let inv = ConstantInverse::new(&grid, &matrix, lambda);
    inv.divide(&mut rhs)?;
    fft_all(&mut rhs, &shape, true);
    let u = Field::from_vec(&grid, rhs.into_iter().map(|v| v.re).collect())?;
    let residual = relative_residual(coeffs, lambda, &u, data)?;
    Ok(SolveResult {
        bundle: SolutionBundle::from_u(u, lambda),
        iterations: 0,
        final_relative_residual: residual,
        residual_history: vec![residual],
        wall_time: start.elapsed(),
    })
}

/// `‖P_λ u - rhs(F)‖ / ‖rhs(F)‖`, zero when both vanish.
pub fn relative_residual(
    coeffs: &Coefficients,
    lambda: f64,
    u: &Field,
    data: &DataBundle,
) -> Result<f64> {
    let b = apply_rhs(data)?;
    let r = &apply_operator(coeffs, lambda, u)? - &b;
    let bn = b.l2_norm();
    Ok(if bn == 0.0 {
        r.l2_norm()
    } else {
        r.l2_norm() / bn
    })
}

/// Matrix-free restarted GMRES, left-preconditioned by the oracle for the mean coefficients.
pub fn solve(
    coeffs: &Coefficients,
    lambda: f64,
    data: &DataBundle,
    options: &SolverOptions,
) -> Result<SolveResult> {
    let start = Instant::now();
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("solve requires lambda > 0".into()));
    }
    options.validate(coeffs.delta())?;
    let grid = *coeffs.grid();
    if data.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let b = apply_rhs(data)?;
    let precond = match options.preconditioner {
        Preconditioner::ConstantMean => {
            Some(ConstantInverse::new(&grid, &coeffs.mean_matrix(), lambda))
        }
        Preconditioner::None => None,
    };
    let apply_a = |v: &[f64]| {
        let f = Field::from_vec_unchecked(&grid, v.to_vec());
        apply_operator(coeffs, lambda, &f)
            .expect("operands share the grid")
            .into_data()
    };
    let apply_m = |v: &[f64]| match &precond {
        Some(p) => p.apply(v).expect("lambda > 0 keeps the symbol invertible"),
        None => v.to_vec(),
    };
    let opts = GmresOptions {
        rtol: options.rtol,
        max_iterations: options.max_iterations,
        restart: options.restart,
    };
    let out = gmres(apply_a, apply_m, b.data(), vec![0.0; grid.len()], &opts)?;
    let u = Field::from_vec(&grid, out.x)?;
    let final_relative_residual = *out.history.last().unwrap_or(&0.0);
    Ok(SolveResult {
        bundle: SolutionBundle::from_u(u, lambda),
        iterations: out.iterations,
        final_relative_residual,
        residual_history: out.history,
        wall_time: start.elapsed(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleNorms {
    pub p: f64,
    pub u_norm: f64,
    pub f_norm: f64,
}

impl BundleNorms {
    /// `‖U‖_p/‖F‖_p`, `None` when `F = 0`.
    pub fn ratio(&self) -> Option<f64> {
        (self.f_norm > 0.0).then(|| self.u_norm / self.f_norm)
    }
}

/// `‖(D½u, D⁺u, √λu)‖_p`.
pub fn solution_norm(bundle: &SolutionBundle, p: f64) -> Result<f64> {
    let scaled = bundle.u.scale(bundle.lambda.sqrt());
    let mut comps: Vec<&Field> = vec![&bundle.half_du];
    comps.extend(bundle.grad.components());
    if bundle.lambda > 0.0 {
        comps.push(&scaled);
    }
    bundle_lp_norm(&comps, p)
}

/// `‖(h, g, f/√λ)‖_p`; the last slot is omitted when `λ = 0`.
pub fn data_norm(data: &DataBundle, p: f64) -> Result<f64> {
    let scaled;
    let mut comps: Vec<&Field> = vec![&data.h];
    comps.extend(data.g.components());
    if data.lambda > 0.0 {
        scaled = data.f.scale(1.0 / data.lambda.sqrt());
        comps.push(&scaled);
    } else if !data.f.is_zero() {
        return Err(Error::InvalidArgument("f must vanish when lambda = 0".into()));
    }
    bundle_lp_norm(&comps, p)
}

pub fn compute_bundles(
    u: &Field,
    lambda: f64,
    data: &DataBundle,
    p_list: &[f64],
) -> Result<(SolutionBundle, Vec<BundleNorms>)> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    if lambda == 0.0 && !data.f.is_zero() {
        return Err(Error::InvalidArgument("f must vanish when lambda = 0".into()));
    }
    u.same_grid(&data.h)?;
    let bundle = SolutionBundle::from_u(u.clone(), lambda);
    let norms = p_list
        .iter()
        .map(|&p| {
            Ok(BundleNorms {
                p,
                u_norm: solution_norm(&bundle, p)?,
                f_norm: data_norm(data, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((bundle, norms))
}

/// `sup_modes (|τ♯| + |σ|² + λ) / |L|`: the spectral norm of the rank-one
/// multiplier taking `(ĥ, ĝ, f̂/√λ)` to `(D½û, σû, √λû)`.
pub fn multiplier_bound(coeffs: &Coefficients, lambda: f64) -> Result<f64> {
    let matrix = require_constant(coeffs)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("multiplier bound needs lambda > 0".into()));
    }
    let grid = coeffs.grid();
    let modes = ModeSymbols::new(grid);
    let sp = modes.spatial_part(&matrix);
    let s_len = sp.len();
    let sig2: Vec<f64> = (0..s_len)
        .map(|s| modes.sigma_at(s).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let mut best = 0.0f64;
    for &tau in &modes.tau {
        for (s, &a) in sp.iter().enumerate() {
            let l = (Complex64::new(lambda, tau) + a).norm();
            best = best.max((tau.abs() + sig2[s] + lambda) / l);
        }
    }
    Ok(best)
}
