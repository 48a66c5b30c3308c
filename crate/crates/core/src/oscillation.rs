//! Cylinder averages, mean oscillations, maximal and sharp functions, tail
//! sums and the empirical checks of the local and mean-oscillation estimates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cylinder::{periodic_distance, Cylinder};
use crate::error::{Error, Result};
use crate::grid::{pointwise_magnitude, Field, Grid, MAX_DIM};
use crate::operator::{gradient_plus, Coefficients, DataBundle};
use crate::solver::relative_residual;
use crate::spectrum::{fft_all, to_complex};

fn checked_indices(grid: &Grid, cyl: &Cylinder) -> Result<Vec<usize>> {
    cyl.check_fits(grid)?;
    let idx = cyl.indices(grid);
    if idx.is_empty() {
        return Err(Error::EmptyCylinder);
    }
    Ok(idx)
}

/// Average over the samples lying in the (closed) cylinder.
pub fn cylinder_mean(field: &Field, cyl: &Cylinder) -> Result<f64> {
    let idx = checked_indices(field.grid(), cyl)?;
    let data = field.data();
    Ok(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64)
}

/// `(|u - (u)_Q|)_Q`.
pub fn mean_oscillation(field: &Field, cyl: &Cylinder) -> Result<f64> {
    mean_oscillation_vec(&[field], cyl)
}

/// `(|V - (V)_Q|)_Q` with the Euclidean norm over components.
pub fn mean_oscillation_vec(components: &[&Field], cyl: &Cylinder) -> Result<f64> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("no components".into()))?;
    let grid = first.grid();
    for c in components {
        first.same_grid(c)?;
    }
    let idx = checked_indices(grid, cyl)?;
    let n = idx.len() as f64;
    let means: Vec<f64> = components
        .iter()
        .map(|c| idx.iter().map(|&i| c.data()[i]).sum::<f64>() / n)
        .collect();
    let total: f64 = idx
        .iter()
        .map(|&i| {
            components
                .iter()
                .zip(&means)
                .map(|(c, m)| (c.data()[i] - m).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / n)
}

/// `((|V|²)_Q)^{1/2}`.
pub fn cylinder_rms(components: &[&Field], cyl: &Cylinder) -> Result<f64> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("no components".into()))?;
    let idx = checked_indices(first.grid(), cyl)?;
    let s: f64 = idx
        .iter()
        .map(|&i| components.iter().map(|c| c.data()[i].powi(2)).sum::<f64>())
        .sum();
    Ok((s / idx.len() as f64).sqrt())
}

/// A cylinder shape: time half-length and spatial radius.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Shape {
    half_length: f64,
    radius: f64,
}

fn shape_kernel(grid: &Grid, shape: Shape) -> (Vec<f64>, usize) {
    let s_len = grid.spatial_len();
    let times: Vec<bool> = (0..grid.n_t())
        .map(|m| {
            periodic_distance(m as f64 * grid.dt(), 0.0, grid.l_t()) <= shape.half_length * (1.0 + 1e-12)
        })
        .collect();
    let ball: Vec<bool> = (0..s_len)
        .map(|s| {
            let m = grid.spatial_multi_index(s);
            let r2: f64 = (0..grid.d())
                .map(|a| periodic_distance(m[a] as f64 * grid.h(a), 0.0, grid.l_x(a)).powi(2))
                .sum();
            r2.sqrt() <= shape.radius * (1.0 + 1e-12)
        })
        .collect();
    let mut count = 0;
    let k = (0..grid.len())
        .map(|i| {
            if times[i / s_len] && ball[i % s_len] {
                count += 1;
                1.0
            } else {
                0.0
            }
        })
        .collect();
    (k, count)
}

/// Means of the field over the given shape centred at every grid point.
fn all_center_means(grid: &Grid, spectrum: &[Complex64], shape: Shape) -> Vec<f64> {
    let dims = grid.shape();
    let (kernel, count) = shape_kernel(grid, shape);
    let mut k = to_complex(&kernel);
    fft_all(&mut k, &dims, false);
    for (kv, sv) in k.iter_mut().zip(spectrum) {
        *kv = *sv * kv.re;
    }
    fft_all(&mut k, &dims, true);
    let inv = 1.0 / count as f64;
    k.into_iter().map(|v| (v.re * inv).max(0.0)).collect()
}

fn dyadic_up_to(start: f64, limit: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut v = start;
    while v < limit {
        out.push(v);
        v *= 2.0;
    }
    out
}

fn parabolic_shapes(grid: &Grid) -> Vec<Shape> {
    let h = (0..grid.d()).map(|a| grid.h(a)).fold(f64::INFINITY, f64::min);
    let l = grid.l_x_all().iter().copied().fold(f64::INFINITY, f64::min);
    dyadic_up_to(2.0 * h, l / 2.0)
        .into_iter()
        .filter(|r| r * r < grid.l_t() / 2.0)
        .map(|r| Shape {
            half_length: r * r,
            radius: r,
        })
        .collect()
}

fn strong_shapes(grid: &Grid) -> Vec<Shape> {
    let h = (0..grid.d()).map(|a| grid.h(a)).fold(f64::INFINITY, f64::min);
    let l = grid.l_x_all().iter().copied().fold(f64::INFINITY, f64::min);
    let radii = dyadic_up_to(2.0 * h, l / 2.0);
    let halves = dyadic_up_to(2.0 * grid.dt(), grid.l_t() / 2.0);
    let mut out: Vec<Shape> = halves
        .iter()
        .flat_map(|&t| radii.iter().map(move |&r| Shape { half_length: t, radius: r }))
        .collect();
    out.extend(parabolic_shapes(grid));
    out
}

/// Offsets (in samples) of candidate centres `{0, ±T/2} × Π{0, ±s/2}` for a shape.
fn center_offsets(grid: &Grid, shape: Shape) -> Vec<[i64; MAX_DIM + 1]> {
    let snap = |v: f64, step: f64| (v / step).round() as i64;
    let t_off = snap(shape.half_length / 2.0, grid.dt());
    let mut out = vec![[0i64; MAX_DIM + 1]];
    for axis in 0..=grid.d() {
        let off = if axis == 0 {
            t_off
        } else {
            snap(shape.radius / 2.0, grid.h(axis - 1))
        };
        if off == 0 {
            continue;
        }
        out = out
            .into_iter()
            .flat_map(|o| {
                [0, off, -off].into_iter().map(move |v| {
                    let mut c = o;
                    c[axis] = v;
                    c
                })
            })
            .collect();
    }
    // Keep only centres whose cylinder still contains the point.
    out.retain(|o| {
        let dt = o[0] as f64 * grid.dt();
        let r2: f64 = (0..grid.d()).map(|a| (o[a + 1] as f64 * grid.h(a)).powi(2)).sum();
        dt.abs() <= shape.half_length * (1.0 + 1e-12) && r2.sqrt() <= shape.radius * (1.0 + 1e-12)
    });
    out
}

fn shifted_index(grid: &Grid, idx: usize, off: &[i64; MAX_DIM + 1]) -> usize {
    let s_len = grid.spatial_len();
    let m_t = (idx / s_len) as i64;
    let ms = grid.spatial_multi_index(idx % s_len);
    let t = (m_t + off[0]).rem_euclid(grid.n_t() as i64) as usize;
    let mut m = [0usize; MAX_DIM];
    for a in 0..grid.d() {
        m[a] = (ms[a] as i64 + off[a + 1]).rem_euclid(grid.n_x(a) as i64) as usize;
    }
    t * s_len + grid.spatial_flat_index(&m)
}

fn maximal_over(field: &Field, shapes: &[Shape]) -> Field {
    let grid = *field.grid();
    let abs: Vec<f64> = field.data().iter().map(|v| v.abs()).collect();
    let mut spec = to_complex(&abs);
    fft_all(&mut spec, &grid.shape(), false);
    let mut out = vec![0.0f64; grid.len()];
    for &shape in shapes {
        let means = all_center_means(&grid, &spec, shape);
        let offsets = center_offsets(&grid, shape);
        for (i, o) in out.iter_mut().enumerate() {
            for off in &offsets {
                *o = o.max(means[shifted_index(&grid, i, off)]);
            }
        }
    }
    Field::from_vec_unchecked(&grid, out)
}

/// Maximal function over parabolic cylinders `Q_r`, dyadic `r` from two cells up.
pub fn parabolic_maximal(field: &Field) -> Field {
    maximal_over(field, &parabolic_shapes(field.grid()))
}

/// Maximal function over `Q_{r,s}` with independent dyadic time and space scales.
pub fn strong_maximal(field: &Field) -> Field {
    maximal_over(field, &strong_shapes(field.grid()))
}

/// Integer number of samples per cell along an axis.
fn cells_per_axis(period: f64, spacing: f64, size: f64, level: i32) -> Result<(usize, usize)> {
    let per_cell = size / spacing;
    let n_cells = period / size;
    let close = |v: f64| (v - v.round()).abs() <= 1e-9 * v.abs().max(1.0);
    if !close(per_cell) || per_cell.round() < 2.0 || !close(n_cells) || n_cells.round() < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "dyadic level {level}: cell size {size} must be an integer multiple (>= 2) of the spacing {spacing} and divide the period {period}"
        )));
    }
    Ok((per_cell.round() as usize, n_cells.round() as usize))
}

/// Cell id of every sample at dyadic level `n`: time cells `2·4^{-n}`, space cells `2^{-n}`.
fn dyadic_cells(grid: &Grid, n: i32) -> Result<(Vec<usize>, usize)> {
    let t_size = 2.0 * 4f64.powi(-n);
    let x_size = 2f64.powi(-n);
    let (t_per, t_cells) = cells_per_axis(grid.l_t(), grid.dt(), t_size, n)?;
    let mut axes = vec![(t_per, t_cells, grid.n_t())];
    for a in 0..grid.d() {
        let (p, c) = cells_per_axis(grid.l_x(a), grid.h(a), x_size, n)?;
        axes.push((p, c, grid.n_x(a)));
    }
    let cell_of = |m: usize, (per, cells, count): (usize, usize, usize)| -> usize {
        let rel = m as i64 - (count / 2) as i64;
        (rel.div_euclid(per as i64)).rem_euclid(cells as i64) as usize
    };
    let s_len = grid.spatial_len();
    let total: usize = axes.iter().map(|a| a.1).product();
    let ids = (0..grid.len())
        .map(|i| {
            let ms = grid.spatial_multi_index(i % s_len);
            let mut id = cell_of(i / s_len, axes[0]);
            for a in 0..grid.d() {
                id = id * axes[a + 1].1 + cell_of(ms[a], axes[a + 1]);
            }
            id
        })
        .collect();
    Ok((ids, total))
}

/// Per-sample oscillation of the containing dyadic cell at level `n`.
fn cell_oscillation(field: &Field, n: i32) -> Result<Vec<f64>> {
    let (ids, total) = dyadic_cells(field.grid(), n)?;
    let data = field.data();
    let mut sum = vec![0.0; total];
    let mut count = vec![0usize; total];
    for (i, &c) in ids.iter().enumerate() {
        sum[c] += data[i];
        count[c] += 1;
    }
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let mut dev = vec![0.0; total];
    for (i, &c) in ids.iter().enumerate() {
        dev[c] += (data[i] - mean[c]).abs();
    }
    let osc: Vec<f64> = dev.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    Ok(ids.iter().map(|&c| osc[c]).collect())
}

/// `sup_n ⨍_{Q^n ∋ X} |f - f_{|n}|` over the given levels.
pub fn dyadic_sharp(field: &Field, levels: std::ops::RangeInclusive<i32>) -> Result<Field> {
    let mut out = vec![0.0f64; field.grid().len()];
    for n in levels {
        for (o, v) in out.iter_mut().zip(cell_oscillation(field, n)?) {
            *o = o.max(v);
        }
    }
    Ok(Field::from_vec_unchecked(field.grid(), out))
}

/// `max` over cells at the given levels of `⨍_cell |f - c|`.
pub fn dyadic_max_deviation(
    field: &Field,
    levels: std::ops::RangeInclusive<i32>,
    c: f64,
) -> Result<f64> {
    let mut best = 0.0f64;
    for n in levels {
        let (ids, total) = dyadic_cells(field.grid(), n)?;
        let mut dev = vec![0.0; total];
        let mut count = vec![0usize; total];
        for (i, &id) in ids.iter().enumerate() {
            dev[id] += (field.data()[i] - c).abs();
            count[id] += 1;
        }
        for (s, &k) in dev.iter().zip(&count) {
            best = best.max(s / k as f64);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicComparison {
    pub level: i32,
    pub cells: usize,
    /// Largest `osc(cell) / osc(cylinder)` over cells with non-zero cylinder oscillation.
    pub max_ratio: f64,
    /// Largest admissible ratio `2·|Q|/|C|` (sample counts) over the cells.
    pub bound: f64,
    pub holds: bool,
}

/// Every level-`n` dyadic cell lies in the parabolic-type cylinder around its
/// centre with `r² = 4^{-n} + dt` and radius = half-diagonal + h; compares oscillations.
pub fn dyadic_cylinder_comparison(field: &Field, level: i32) -> Result<DyadicComparison> {
    let grid = *field.grid();
    let (ids, total) = dyadic_cells(&grid, level)?;
    let d = grid.d();
    let x_size = 2f64.powi(-level);
    let hmax = (0..d).map(|a| grid.h(a)).fold(0.0, f64::max);
    let r = (4f64.powi(-level) + grid.dt()).sqrt();
    let s = (d as f64).sqrt() * x_size / 2.0 + hmax;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); total];
    for (i, &c) in ids.iter().enumerate() {
        members[c].push(i);
    }
    let data = field.data();
    let mut max_ratio = 0.0f64;
    let mut bound = 0.0f64;
    let mut holds = true;
    for cell in &members {
        // Cell centre: midpoint of the sample extent, one half-spacing past the last sample.
        let first = grid.point(cell[0]);
        let last = grid.point(*cell.last().expect("non-empty cell"));
        let tc = 0.5 * (first.t + last.t + grid.dt());
        let mut xc = [0.0; MAX_DIM];
        for a in 0..d {
            xc[a] = 0.5 * (first.x[a] + last.x[a] + grid.h(a));
        }
        let cyl = Cylinder::new(tc, &xc[..d], r, s);
        let q = checked_indices(&grid, &cyl)?;
        let mean_c = cell.iter().map(|&i| data[i]).sum::<f64>() / cell.len() as f64;
        let osc_c = cell.iter().map(|&i| (data[i] - mean_c).abs()).sum::<f64>() / cell.len() as f64;
        let osc_q = mean_oscillation(field, &cyl)?;
        let allowed = 2.0 * q.len() as f64 / cell.len() as f64;
        bound = bound.max(allowed);
        if osc_q > 0.0 {
            max_ratio = max_ratio.max(osc_c / osc_q);
        }
        if osc_c > allowed * osc_q * (1.0 + 1e-12) + 1e-14 {
            holds = false;
        }
    }
    Ok(DyadicComparison {
        level,
        cells: total,
        max_ratio,
        bound,
        holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSum {
    pub value: f64,
    pub terms: usize,
    pub warning: Option<String>,
}

/// `Σ_{j<J} 2^{-j/4} ((|F|²)_{Q_{2^{j/2}κr, κr}(X)})^{1/2}` for a magnitude field `|F|`.
/// Terms whose time half-length `2^j κ² r²` reaches `l_t/2` are dropped with a warning.
pub fn tail_sum(magnitude: &Field, r: f64, kappa: f64, center: (f64, &[f64]), j_terms: usize) -> Result<TailSum> {
    let grid = magnitude.grid();
    let base = kappa * r;
    let mut fit = 0;
    while fit < j_terms && 2f64.powi(fit as i32) * base * base < grid.l_t() / 2.0 {
        fit += 1;
    }
    let warning = (fit < j_terms).then(|| {
        format!("tail sum truncated from {j_terms} to {fit} terms: time extent exceeds l_t/2")
    });
    let mut value = 0.0;
    for j in 0..fit {
        let cyl = Cylinder::new(center.0, center.1, 2f64.powf(j as f64 / 2.0) * base, base);
        value += 2f64.powf(-(j as f64) / 4.0) * cylinder_rms(&[magnitude], &cyl)?;
    }
    Ok(TailSum {
        value,
        terms: fit,
        warning,
    })
}

/// `Θ_u = Σ_j a_1j (D⁺u)_j`.
pub fn theta_field(coeffs: &Coefficients, u: &Field) -> Result<Field> {
    let flux = coeffs.apply(&gradient_plus(u))?;
    Ok(flux.component(0).clone())
}

/// `|F| = (h² + |g|² + f²/λ)^{1/2}` pointwise.
pub fn data_magnitude(data: &DataBundle) -> Result<Field> {
    let scaled = if data.lambda > 0.0 {
        data.f.scale(1.0 / data.lambda.sqrt())
    } else {
        Field::zeros(data.grid())
    };
    let mut comps: Vec<&Field> = vec![&data.h];
    comps.extend(data.g.components());
    comps.push(&scaled);
    pointwise_magnitude(&comps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEstimateReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; `None` for the consistent `0/0` case.
    pub n_emp: Option<f64>,
    pub trivially_consistent: bool,
    pub tail_terms: usize,
    pub residual: f64,
    pub warning: Option<String>,
}

/// Compares `(|U|²)^{1/2}_{Q_R}` with the tail sum of `|F|` for a solution supported in `ℝ × B_R`.
pub fn verify_local_estimate(
    coeffs: &Coefficients,
    lambda: f64,
    data: &DataBundle,
    u: &Field,
    radius: f64,
    rtol: f64,
) -> Result<LocalEstimateReport> {
    let grid = *u.grid();
    let residual = relative_residual(coeffs, lambda, u, data)?;
    if residual > rtol {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: rtol,
        });
    }
    let outside = (0..grid.len()).any(|i| {
        let p = grid.point(i);
        let r = p.x[..grid.d()].iter().map(|v| v * v).sum::<f64>().sqrt();
        r >= radius && u.data()[i] != 0.0
    });
    if outside {
        return Err(Error::InvalidArgument(format!(
            "u is not supported in the ball of radius {radius}"
        )));
    }
    let origin = [0.0; MAX_DIM];
    let bundle = crate::operator::SolutionBundle::from_u(u.clone(), lambda);
    let su = u.scale(lambda.sqrt());
    let mut comps: Vec<&Field> = vec![&bundle.half_du];
    comps.extend(bundle.grad.components());
    comps.push(&su);
    let lhs = cylinder_rms(&comps, &Cylinder::parabolic(0.0, &origin[..grid.d()], radius))?;
    let max_terms = 64;
    let tail = tail_sum(&data_magnitude(data)?, radius, 1.0, (0.0, &origin[..grid.d()]), max_terms)?;
    let trivially_consistent = lhs == 0.0 && tail.value == 0.0;
    Ok(LocalEstimateReport {
        lhs,
        rhs: tail.value,
        n_emp: (!trivially_consistent).then(|| lhs / tail.value),
        trivially_consistent,
        tail_terms: tail.terms,
        residual,
        warning: tail.warning,
    })
}

/// `u = exp(-t²/(2w²))·b(|x|/ρ)` with the smooth bump `b(s) = exp(1 - 1/(1 - s²))`,
/// and data `h = -H D½u`, `g = -a D⁺u`, `f = λu` for which it is an exact solution.
pub fn manufactured_local_problem(
    coeffs: &Coefficients,
    lambda: f64,
    time_width: f64,
    support_radius: f64,
) -> Result<(Field, DataBundle)> {
    let grid = *coeffs.grid();
    let u = Field::from_fn(&grid, |p| {
        let r = p.x[..grid.d()].iter().map(|v| v * v).sum::<f64>().sqrt() / support_radius;
        if r >= 1.0 {
            0.0
        } else {
            (-p.t * p.t / (2.0 * time_width * time_width)).exp() * (1.0 - 1.0 / (1.0 - r * r)).exp()
        }
    })?;
    let h = crate::fractional::hilbert(&crate::fractional::half_derivative(&u)).scale(-1.0);
    let g = coeffs
        .apply(&gradient_plus(&u))?
        .map_components(|c| c.scale(-1.0));
    let f = u.scale(lambda);
    let data = DataBundle::new(h, g, f, lambda)?;
    Ok((u, data))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OscillationCase {
    /// `(Du, √λu)` for time-measurable coefficients.
    #[serde(rename = "calU_time_coeffs")]
    CalUTimeCoeffs,
    /// `(D½u, Du, √λu)` for the heat operator.
    #[serde(rename = "U_heat")]
    UHeat,
    /// `(D'u, √λu, Θ_u)` for `x₁`-measurable coefficients.
    #[serde(rename = "calUprime_theta_x1")]
    CalUPrimeThetaX1,
}

impl OscillationCase {
    /// Decay exponent of the homogeneous term in κ.
    pub fn expected_exponent(self) -> f64 {
        match self {
            Self::CalUTimeCoeffs | Self::UHeat => -1.0,
            Self::CalUPrimeThetaX1 => -0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::CalUTimeCoeffs => "calU_time_coeffs",
            Self::UHeat => "U_heat",
            Self::CalUPrimeThetaX1 => "calUprime_theta_x1",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationRow {
    pub kappa: f64,
    pub r: f64,
    pub center_t: f64,
    pub center_x: Vec<f64>,
    pub oscillation: f64,
    /// `((|V|²)_{Q_{κr}})^{1/2}`.
    pub outer_rms: f64,
    /// `κ^{α}·outer_rms` with α the expected exponent.
    pub homogeneous_term: f64,
    /// `κ^{1+d/2}` times the tail sum of `|F|`.
    pub data_term: f64,
    /// `oscillation / (homogeneous_term + data_term)`, `None` for `0/0`.
    pub empirical_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub case: OscillationCase,
    pub rows: Vec<OscillationRow>,
    /// Least-squares slope of `ln(oscillation)` against `ln κ`; `None` with fewer
    /// than two positive oscillations.
    pub fitted_slope: Option<f64>,
    pub expected_exponent: f64,
    pub warnings: Vec<String>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// The solution bundle examined for each case.
pub fn case_components(
    case: OscillationCase,
    coeffs: &Coefficients,
    lambda: f64,
    u: &Field,
) -> Result<Vec<Field>> {
    let grad = gradient_plus(u);
    let su = u.scale(lambda.sqrt());
    Ok(match case {
        OscillationCase::CalUTimeCoeffs => {
            let mut v = grad.into_components();
            v.push(su);
            v
        }
        OscillationCase::UHeat => {
            let mut v = vec![crate::fractional::half_derivative(u)];
            v.extend(grad.into_components());
            v.push(su);
            v
        }
        OscillationCase::CalUPrimeThetaX1 => {
            let mut v: Vec<Field> = grad.into_components().into_iter().skip(1).collect();
            v.push(su);
            v.push(theta_field(coeffs, u)?);
            v
        }
    })
}

/// Mean oscillation of the case bundle over `Q_r(X)` with `r = R/κ`, for a
/// fixed outer cylinder `Q_R(X)`, together with the two terms of the bound.
#[allow(clippy::too_many_arguments)]
pub fn verify_mean_oscillation(
    case: OscillationCase,
    coeffs: &Coefficients,
    lambda: f64,
    data: &DataBundle,
    u: &Field,
    kappa_list: &[f64],
    outer_radius: f64,
    center: (f64, &[f64]),
    rtol: f64,
) -> Result<OscillationReport> {
    let grid = *u.grid();
    let residual = relative_residual(coeffs, lambda, u, data)?;
    if residual > rtol {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: rtol,
        });
    }
    let comps = case_components(case, coeffs, lambda, u)?;
    let refs: Vec<&Field> = comps.iter().collect();
    let magnitude = data_magnitude(data)?;
    let alpha = case.expected_exponent();
    let mut warnings = Vec::new();
    let outer = Cylinder::parabolic(center.0, center.1, outer_radius);
    if outer.check_fits(&grid).is_err() {
        return Err(Error::CylinderOutOfRange(format!(
            "outer radius {outer_radius} does not fit the grid"
        )));
    }
    let outer_rms = cylinder_rms(&refs, &outer)?;
    let mut rows = Vec::new();
    for &kappa in kappa_list {
        if kappa < 4.0 {
            warnings.push(format!("kappa {kappa} < 4 skipped"));
            continue;
        }
        let r = outer_radius / kappa;
        let inner = Cylinder::parabolic(center.0, center.1, r);
        let oscillation = match mean_oscillation_vec(&refs, &inner) {
            Ok(v) => v,
            Err(Error::EmptyCylinder) => {
                warnings.push(format!("kappa {kappa}: inner cylinder below grid resolution"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let tail = tail_sum(&magnitude, r, kappa, center, 64)?;
        if let Some(w) = tail.warning {
            warnings.push(format!("kappa {kappa}: {w}"));
        }
        let homogeneous_term = kappa.powf(alpha) * outer_rms;
        let data_term = kappa.powf(1.0 + grid.d() as f64 / 2.0) * tail.value;
        let denom = homogeneous_term + data_term;
        rows.push(OscillationRow {
            kappa,
            r,
            center_t: center.0,
            center_x: center.1.to_vec(),
            oscillation,
            outer_rms,
            homogeneous_term,
            data_term,
            empirical_constant: (denom > 0.0).then(|| oscillation / denom),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.oscillation > 0.0)
        .map(|r| (r.kappa.ln(), r.oscillation.ln()))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Ok(OscillationReport {
        case,
        rows,
        fitted_slope: fit_slope(&xs, &ys),
        expected_exponent: alpha,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{field_from_expression, noise_field};

    fn grid1() -> Grid {
        Grid::new(1, 64, &[64], 2.0, &[2.0]).unwrap()
    }

    #[test]
    fn constant_has_zero_oscillation() {
        let g = grid1();
        let c = Field::constant(&g, 2.5);
        let q = Cylinder::parabolic(0.0, &[0.0], 0.5);
        assert_eq!(mean_oscillation(&c, &q).unwrap(), 0.0);
        assert_eq!(cylinder_mean(&c, &q).unwrap(), 2.5);
    }

    #[test]
    fn linear_field_oscillation() {
        let g = Grid::new(1, 16, &[1024], 2.0, &[4.0]).unwrap();
        let x = field_from_expression(&g, "x1").unwrap();
        let r = 0.5;
        let q = Cylinder::parabolic(0.0, &[0.0], r);
        assert!(cylinder_mean(&x, &q).unwrap().abs() < 1e-14);
        let osc = mean_oscillation(&x, &q).unwrap();
        assert!((osc - r / 2.0).abs() < 2.0 * g.h(0), "{osc}");
    }

    #[test]
    fn empty_cylinder_rejected() {
        let g = grid1();
        let q = Cylinder::new(0.01, &[0.01], 0.001, 0.001);
        assert!(matches!(cylinder_mean(&Field::zeros(&g), &q), Err(Error::EmptyCylinder)));
    }

    #[test]
    fn maximal_functions_basic() {
        let g = Grid::new(1, 32, &[32], 4.0, &[2.0]).unwrap();
        let c = Field::constant(&g, -1.5);
        for m in [parabolic_maximal(&c), strong_maximal(&c)] {
            assert!(m.data().iter().all(|v| (v - 1.5).abs() < 1e-12));
        }
        let f = noise_field(&g, 3, 0.5);
        let mp = parabolic_maximal(&f);
        let ms = strong_maximal(&f);
        for i in 0..g.len() {
            assert!(ms.data()[i] >= mp.data()[i] - 1e-12);
        }
    }

    #[test]
    fn dyadic_sharp_of_step() {
        let g = Grid::new(1, 64, &[64], 2.0, &[2.0]).unwrap();
        let f = field_from_expression(&g, "step(x1 - 0.25)").unwrap();
        let sharp = dyadic_sharp(&f, 0..=2).unwrap();
        for i in 0..g.len() {
            let x = g.point(i).x[0];
            let v = sharp.data()[i];
            if (0.0..0.5).contains(&x) {
                assert!((v - 0.5).abs() < 1e-12, "x={x} v={v}");
            }
            if !(0.0..1.0).contains(&x) {
                assert_eq!(v, 0.0);
            }
        }
        let edge = field_from_expression(&g, "step(x1)").unwrap();
        assert_eq!(dyadic_sharp(&edge, 0..=2).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn dyadic_sharp_rejects_fine_levels() {
        let g = Grid::new(1, 64, &[64], 2.0, &[2.0]).unwrap();
        assert!(dyadic_sharp(&Field::zeros(&g), 0..=4).is_err());
    }

    #[test]
    fn tail_sum_of_constant() {
        let g = Grid::new(1, 64, &[16], 64.0, &[4.0]).unwrap();
        let c = Field::constant(&g, 3.0);
        let t = tail_sum(&c, 0.5, 1.0, (0.0, &[0.0]), 5).unwrap();
        let want = 3.0 * (1.0 - 2f64.powf(-5.0 / 4.0)) / (1.0 - 2f64.powf(-0.25));
        assert!((t.value - want).abs() < 1e-12);
        assert!(t.warning.is_none());
        let t = tail_sum(&c, 0.5, 1.0, (0.0, &[0.0]), 40).unwrap();
        assert!(t.warning.is_some() && t.terms < 40);
        assert_eq!(tail_sum(&Field::zeros(&g), 0.5, 1.0, (0.0, &[0.0]), 5).unwrap().value, 0.0);
    }

    #[test]
    fn theta_examples() {
        let g = Grid::new(2, 8, &[16, 16], 1.0, &[1.0, 1.0]).unwrap();
        let u = noise_field(&g, 2, 0.5);
        let a = Coefficients::identity(&g);
        assert_eq!(theta_field(&a, &u).unwrap(), gradient_plus(&u).component(0).clone());
        let ut = field_from_expression(&g, "sin(2*pi*t)").unwrap();
        assert!(theta_field(&a, &ut).unwrap().max_abs() < 1e-12);
        let el = crate::operator::Ellipticity::new(0.5).unwrap();
        let a2 = Coefficients::constant(&g, &[2.0, 0.0, 0.0, 1.0], el).unwrap();
        let us = field_from_expression(&g, "sin(2*pi*x1)").unwrap();
        let th = theta_field(&a2, &us).unwrap();
        assert!((&th - &gradient_plus(&us).component(0).scale(2.0)).max_abs() < 1e-12);
    }

    #[test]
    fn slope_fit() {
        let x = [1.0f64, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.7 * v).collect();
        assert!((fit_slope(&x, &y).unwrap() + 0.7).abs() < 1e-14);
        assert!(fit_slope(&[1.0], &[1.0]).is_none());
    }
}
