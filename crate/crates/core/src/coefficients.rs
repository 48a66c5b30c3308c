//! Coefficient generators, small-oscillation checkers and coefficient freezing.
//!
//! Generated matrices are `Q diag(μ) Qᵀ + S` with `μ_i ∈ [δ, δ + ¾(1/δ - δ)]`
//! and a skew part of spectral norm at most `¼(1/δ - δ)`, so the symmetric part
//! is bounded below by `δ` and the pointwise spectral norm is at most `1/δ`.
//! Random structure (jump locations, matrices) is drawn in physical coordinates,
//! so a refined grid samples the same coefficient function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::{ball_indices, Cylinder};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, MAX_DIM};
use crate::operator::{Coefficients, Ellipticity, StructureTag};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientKind {
    Constant,
    TimePiecewise { n_jumps: usize },
    X1Piecewise { n_jumps: usize },
    /// `I + ε·s(x)·I` with `s = ±1` alternating on spatial cells of size `roughness_scale`.
    Checkerboard { epsilon: f64 },
    Smooth,
}

/// Largest checkerboard amplitude keeping `δ ≤ 1 - ε` and `1 + ε ≤ 1/δ`.
pub fn max_checkerboard_epsilon(delta: f64) -> f64 {
    (1.0 - delta).min(1.0 / delta - 1.0)
}

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut q: Vec<[f64; MAX_DIM]> = (0..d)
            .map(|_| {
                let mut v = [0.0; MAX_DIM];
                for c in v.iter_mut().take(d) {
                    *c = StandardNormal.sample(rng);
                }
                v
            })
            .collect();
        let mut ok = true;
        for i in 0..d {
            for j in 0..i {
                let dot: f64 = (0..d).map(|k| q[i][k] * q[j][k]).sum();
                for k in 0..d {
                    q[i][k] -= dot * q[j][k];
                }
            }
            let n = (0..d).map(|k| q[i][k] * q[i][k]).sum::<f64>().sqrt();
            if n < 1e-8 {
                ok = false;
                break;
            }
            for k in 0..d {
                q[i][k] /= n;
            }
        }
        if ok {
            return (0..d * d).map(|k| q[k / d][k % d]).collect();
        }
    }
}

/// One random admissible matrix (row-major).
pub fn random_admissible_matrix(d: usize, delta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let spread = 1.0 / delta - delta;
    let q = random_orthogonal(d, rng);
    let mu: Vec<f64> = (0..d)
        .map(|_| delta + 0.75 * spread * rng.random::<f64>())
        .collect();
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = (0..d).map(|k| q[i * d + k] * mu[k] * q[j * d + k]).sum();
        }
    }
    if d > 1 {
        // Skew part with Frobenius (hence spectral) norm at most spread/4.
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..i {
                let v: f64 = rng.random_range(-1.0..1.0);
                s[i * d + j] = v;
                s[j * d + i] = -v;
            }
        }
        let fro = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        if fro > 0.0 {
            let scale = 0.25 * spread * rng.random::<f64>() / fro;
            for (ai, si) in a.iter_mut().zip(&s) {
                *ai += scale * si;
            }
        }
    }
    a
}

fn sorted_jumps(n: usize, period: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut j: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-period / 2.0..period / 2.0))
        .collect();
    j.sort_by(f64::total_cmp);
    j
}

/// Slab index of `x` for sorted jump points on a circle; slabs wrap so there are `n` of them.
fn slab_of(x: f64, jumps: &[f64]) -> usize {
    let n = jumps.len();
    let below = jumps.partition_point(|&j| j <= x);
    if below == 0 {
        n - 1
    } else {
        below - 1
    }
}

fn fields_from(grid: &Grid, d: usize, f: impl Fn(usize) -> Vec<f64>) -> Vec<Field> {
    let mut data = vec![vec![0.0; grid.len()]; d * d];
    for idx in 0..grid.len() {
        let m = f(idx);
        for (k, v) in m.into_iter().enumerate() {
            data[k][idx] = v;
        }
    }
    data.into_iter()
        .map(|v| Field::from_vec(grid, v).expect("finite coefficients"))
        .collect()
}

pub fn generate_coefficients(
    kind: CoefficientKind,
    delta: f64,
    seed: u64,
    grid: &Grid,
    roughness_scale: f64,
) -> Result<Coefficients> {
    let el = Ellipticity::new(delta)?;
    let d = grid.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_len = grid.spatial_len();
    match kind {
        CoefficientKind::Constant => {
            let m = random_admissible_matrix(d, delta, &mut rng);
            Coefficients::constant(grid, &m, el)
        }
        CoefficientKind::TimePiecewise { n_jumps } | CoefficientKind::X1Piecewise { n_jumps } => {
            let time = matches!(kind, CoefficientKind::TimePiecewise { .. });
            let n = n_jumps.max(1);
            let period = if time { grid.l_t() } else { grid.l_x(0) };
            let jumps = sorted_jumps(n, period, &mut rng);
            let mats: Vec<Vec<f64>> = (0..n)
                .map(|_| random_admissible_matrix(d, delta, &mut rng))
                .collect();
            let entries = fields_from(grid, d, |idx| {
                let c = if time {
                    grid.time_coord(idx / s_len)
                } else {
                    grid.point(idx).x[0]
                };
                mats[slab_of(c, &jumps)].clone()
            });
            let tag = if time {
                StructureTag::TimeMeasurable
            } else {
                StructureTag::X1Measurable
            };
            Coefficients::new(entries, tag, el)
        }
        CoefficientKind::Checkerboard { epsilon } => {
            let max = max_checkerboard_epsilon(delta);
            if !(epsilon >= 0.0) || epsilon > max * (1.0 + 1e-12) {
                return Err(Error::EpsilonTooLarge {
                    requested: epsilon,
                    max_admissible: max,
                });
            }
            if !(roughness_scale > 0.0) {
                return Err(Error::InvalidArgument("roughness_scale must be positive".into()));
            }
            let entries = fields_from(grid, d, |idx| {
                let p = grid.point(idx);
                let parity: i64 = (0..d)
                    .map(|a| (p.x[a] / roughness_scale).floor() as i64)
                    .sum();
                let s = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                (0..d * d)
                    .map(|k| if k / d == k % d { 1.0 + epsilon * s } else { 0.0 })
                    .collect()
            });
            Coefficients::new(entries, StructureTag::General, el)
        }
        CoefficientKind::Smooth => {
            if !(roughness_scale > 0.0) {
                return Err(Error::InvalidArgument("roughness_scale must be positive".into()));
            }
            let amp = 0.5 * max_checkerboard_epsilon(delta);
            let phases: Vec<f64> = (0..d + 1)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let tau = std::f64::consts::TAU;
            let entries = fields_from(grid, d, |idx| {
                let p = grid.point(idx);
                let mut v = (tau * p.t / grid.l_t() + phases[0]).cos();
                for a in 0..d {
                    v *= (tau * p.x[a] / roughness_scale + phases[a + 1]).sin();
                }
                (0..d * d)
                    .map(|k| if k / d == k % d { 1.0 + amp * v } else { 0.0 })
                    .collect()
            });
            Coefficients::new(entries, StructureTag::General, el)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionKind {
    /// Oscillation in `x` at fixed time.
    Time,
    /// Oscillation in `(t, x')` at fixed `x₁`.
    X1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub gamma_estimate: f64,
    pub r_grid: Vec<f64>,
    pub worst_cylinder: Option<Cylinder>,
    pub assumption_kind: AssumptionKind,
    pub r0: f64,
    /// Number of centres scanned per axis (time first).
    pub centers_per_axis: Vec<usize>,
}

const MAX_CENTERS_PER_AXIS: usize = 16;

fn center_indices(n: usize) -> Vec<usize> {
    let stride = n.div_ceil(MAX_CENTERS_PER_AXIS).max(1);
    (0..n).step_by(stride).collect()
}

fn dyadic_radii(grid: &Grid, r0: f64) -> Vec<f64> {
    let h = (0..grid.d()).map(|a| grid.h(a)).fold(f64::INFINITY, f64::min);
    let mut r = r0;
    let mut out = Vec::new();
    while r >= 2.0 * h * (1.0 - 1e-12) {
        out.push(r);
        r /= 2.0;
    }
    if out.is_empty() {
        out.push(r0);
    }
    out
}

fn check_r0(grid: &Grid, r0: f64) -> Result<()> {
    let min_l = grid.l_x_all().iter().copied().fold(f64::INFINITY, f64::min);
    if !(r0 > 0.0 && r0 <= 1.0) || r0 > min_l / 4.0 * (1.0 + 1e-12) || r0 * r0 >= grid.l_t() / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "R0 = {r0} must lie in (0, 1], not exceed l_x/4 and have R0^2 < l_t/2"
        )));
    }
    Ok(())
}

/// Centres of the spatial scan lattice as flat spatial indices.
fn spatial_centers(grid: &Grid) -> Vec<usize> {
    let per_axis: Vec<Vec<usize>> = grid.n_x_all().iter().map(|&n| center_indices(n)).collect();
    let mut out = vec![Vec::new()];
    for axis in per_axis.iter() {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&m| {
                    let mut p = prefix.clone();
                    p.push(m);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(|m| grid.spatial_flat_index(&m)).collect()
}

fn spatial_coords(grid: &Grid, s: usize) -> [f64; MAX_DIM] {
    let m = grid.spatial_multi_index(s);
    let mut x = [0.0; MAX_DIM];
    for a in 0..grid.d() {
        x[a] = grid.space_coord(a, m[a]);
    }
    x
}

/// Time window `{m : |t_m - t_c| ≤ r²}` as indices.
fn time_window(grid: &Grid, mc: usize, r: f64) -> Vec<usize> {
    Cylinder::parabolic(grid.time_coord(mc), &[0.0; MAX_DIM][..grid.d()], r).time_indices(grid)
}

#[derive(Clone, Copy)]
struct Candidate {
    gamma: f64,
    cyl: Cylinder,
}

fn best(cands: impl IntoIterator<Item = Candidate>) -> Option<Candidate> {
    // Sequential fold keeps the first maximiser, so reports are deterministic.
    cands.into_iter().fold(None, |acc: Option<Candidate>, c| match acc {
        Some(a) if a.gamma >= c.gamma => Some(a),
        _ => Some(c),
    })
}

/// Brute-force estimate of `sup ⨍_{Q_r} |a(s,y) - ⨍_{B_r(x)} a(s,·)|` over the scan family.
pub fn check_assumption_time(coeffs: &Coefficients, r0: f64) -> Result<AssumptionReport> {
    let grid = *coeffs.grid();
    check_r0(&grid, r0)?;
    let radii = dyadic_radii(&grid, r0);
    let s_len = grid.spatial_len();
    let t_centers = center_indices(grid.n_t());
    let work: Vec<(f64, usize)> = radii
        .iter()
        .flat_map(|&r| spatial_centers(&grid).into_iter().map(move |s| (r, s)))
        .collect();
    let per_task: Vec<Vec<Candidate>> = work
        .par_iter()
        .map(|&(r, sc)| {
            let xc = spatial_coords(&grid, sc);
            let ball = ball_indices(&grid, &xc[..grid.d()], r, 0);
            // Per time slice: oscillation of every entry over the ball, maximised over entries.
            let per_slice: Vec<Vec<f64>> = coeffs
                .entries()
                .iter()
                .map(|e| {
                    let data = e.data();
                    (0..grid.n_t())
                        .map(|m| {
                            let vals = ball.iter().map(|&s| data[m * s_len + s]);
                            let mean = shifted_mean(vals.clone());
                            vals.map(|v| (v - mean).abs()).sum::<f64>() / ball.len() as f64
                        })
                        .collect()
                })
                .collect();
            t_centers
                .iter()
                .map(|&mc| {
                    let win = time_window(&grid, mc, r);
                    let gamma = per_slice
                        .iter()
                        .map(|osc| win.iter().map(|&m| osc[m]).sum::<f64>() / win.len() as f64)
                        .fold(0.0, f64::max);
                    Candidate {
                        gamma,
                        cyl: Cylinder::new(grid.time_coord(mc), &xc[..grid.d()], r, r),
                    }
                })
                .collect()
        })
        .collect();
    let worst = best(per_task.into_iter().flatten());
    Ok(report(worst, radii, AssumptionKind::Time, r0, &grid))
}

fn report(
    worst: Option<Candidate>,
    radii: Vec<f64>,
    kind: AssumptionKind,
    r0: f64,
    grid: &Grid,
) -> AssumptionReport {
    let mut centers = vec![center_indices(grid.n_t()).len()];
    centers.extend(grid.n_x_all().iter().map(|&n| center_indices(n).len()));
    AssumptionReport {
        gamma_estimate: worst.map_or(0.0, |c| c.gamma),
        r_grid: radii,
        worst_cylinder: worst.map(|c| c.cyl),
        assumption_kind: kind,
        r0,
        centers_per_axis: centers,
    }
}

/// Brute-force estimate of `sup ⨍_{Q_r} |a(s,y₁,y') - ⨍_{Q'_r(t,x')} a(·,y₁,·)|`.
pub fn check_assumption_x1(coeffs: &Coefficients, r0: f64) -> Result<AssumptionReport> {
    let grid = *coeffs.grid();
    check_r0(&grid, r0)?;
    let radii = dyadic_radii(&grid, r0);
    let s_len = grid.spatial_len();
    let n1 = grid.n_x(0);
    let st1 = grid.spatial_stride(0);
    let t_centers = center_indices(grid.n_t());
    let work: Vec<(f64, usize, usize)> = radii
        .iter()
        .flat_map(|&r| {
            let tc = t_centers.clone();
            spatial_centers(&grid)
                .into_iter()
                .flat_map(move |s| tc.clone().into_iter().map(move |m| (r, s, m)))
        })
        .collect();
    let cands: Vec<Candidate> = work
        .par_iter()
        .map(|&(r, sc, mc)| {
            let xc = spatial_coords(&grid, sc);
            let ball = ball_indices(&grid, &xc[..grid.d()], r, 0);
            // Transverse ball B'_r(x') at x₁ index 0; shifting by x₁ index gives the others.
            let prime: Vec<usize> = ball_indices(&grid, &xc[..grid.d()], r, 1)
                .into_iter()
                .filter(|&s| (s / st1) % n1 == 0)
                .collect();
            let win = time_window(&grid, mc, r);
            let gamma = coeffs
                .entries()
                .iter()
                .map(|e| {
                    let data = e.data();
                    let mut bar = vec![f64::NAN; n1];
                    let mut total = 0.0;
                    for &m in &win {
                        for &s in &ball {
                            let j = (s / st1) % n1;
                            if bar[j].is_nan() {
                                bar[j] = shifted_mean(win.iter().flat_map(|&mm| {
                                    prime.iter().map(move |&sp| data[mm * s_len + sp + j * st1])
                                }));
                            }
                            total += (data[m * s_len + s] - bar[j]).abs();
                        }
                    }
                    total / (win.len() * ball.len()) as f64
                })
                .fold(0.0, f64::max);
            Candidate {
                gamma,
                cyl: Cylinder::new(grid.time_coord(mc), &xc[..grid.d()], r, r),
            }
        })
        .collect();
    Ok(report(best(cands), radii, AssumptionKind::X1, r0, &grid))
}

/// `ā_ij(t) = ⨍_{B_s(x₀)} a_ij(t, ·)` for the cylinder's spatial ball, at every time.
pub fn freeze_time(coeffs: &Coefficients, cyl: &Cylinder) -> Result<Coefficients> {
    let grid = *coeffs.grid();
    cyl.check_fits(&grid)?;
    let ball = cyl.spatial_indices(&grid);
    if ball.is_empty() {
        return Err(Error::EmptyCylinder);
    }
    let s_len = grid.spatial_len();
    let entries = coeffs
        .entries()
        .iter()
        .map(|e| {
            let data = e.data();
            let mut out = vec![0.0; grid.len()];
            for m in 0..grid.n_t() {
                let mean = shifted_mean(ball.iter().map(|&s| data[m * s_len + s]));
                out[m * s_len..(m + 1) * s_len].fill(mean);
            }
            Field::from_vec(&grid, out)
        })
        .collect::<Result<Vec<_>>>()?;
    let tag = match coeffs.tag() {
        StructureTag::Constant => StructureTag::Constant,
        _ => StructureTag::TimeMeasurable,
    };
    Coefficients::new(entries, tag, coeffs.ellipticity())
}

/// Time slabs `(τ_k - R², τ_k + R²]`, `τ_k = t₀ + 2kR²`, with per-slab averages
/// over `slab × B'_R(x₀')` at every `x₁`.
pub fn freeze_x1_piecewise(
    coeffs: &Coefficients,
    r: f64,
    t0: f64,
    x0_prime: &[f64],
) -> Result<Coefficients> {
    let grid = *coeffs.grid();
    let d = grid.d();
    if x0_prime.len() != d - 1 {
        return Err(Error::InvalidArgument(format!(
            "x0' needs {} coordinates",
            d - 1
        )));
    }
    let mut center = [0.0; MAX_DIM];
    center[1..d].copy_from_slice(x0_prime);
    Cylinder::new(t0, &center[..d], r, r).check_fits(&grid)?;
    let r2 = r * r;
    let slab_of = |t: f64| -> i64 {
        // Distance from t0 measured on the unwrapped axis, so one slab may be partial.
        ((t - t0 + r2) / (2.0 * r2)).ceil() as i64 - 1
    };
    let slabs: Vec<i64> = (0..grid.n_t()).map(|m| slab_of(grid.time_coord(m))).collect();
    let s_len = grid.spatial_len();
    let n1 = grid.n_x(0);
    let st1 = grid.spatial_stride(0);
    let prime: Vec<usize> = ball_indices(&grid, &center[..d], r, 1)
        .into_iter()
        .filter(|&s| (s / st1) % n1 == 0)
        .collect();
    if prime.is_empty() {
        return Err(Error::EmptyCylinder);
    }
    let entries = coeffs
        .entries()
        .iter()
        .map(|e| {
            let data = e.data();
            let mut out = vec![0.0; grid.len()];
            let mut m = 0;
            while m < grid.n_t() {
                let k = slabs[m];
                let end = (m..grid.n_t()).find(|&q| slabs[q] != k).unwrap_or(grid.n_t());
                for j in 0..n1 {
                    let mean = shifted_mean((m..end).flat_map(|mm| {
                        prime.iter().map(move |&sp| data[mm * s_len + sp + j * st1])
                    }));
                    for mm in m..end {
                        for s in 0..s_len {
                            if (s / st1) % n1 == j {
                                out[mm * s_len + s] = mean;
                            }
                        }
                    }
                }
                m = end;
            }
            Field::from_vec(&grid, out)
        })
        .collect::<Result<Vec<_>>>()?;
    let tag = match coeffs.tag() {
        StructureTag::Constant => StructureTag::Constant,
        StructureTag::X1Measurable => StructureTag::X1Measurable,
        _ => StructureTag::General,
    };
    Coefficients::new(entries, tag, coeffs.ellipticity())
}

/// Mean computed relative to the first value, so constant inputs average exactly.
pub(crate) fn shifted_mean(mut vals: impl Iterator<Item = f64>) -> f64 {
    let Some(first) = vals.next() else {
        return f64::NAN;
    };
    let (mut acc, mut n) = (0.0, 1usize);
    for v in vals {
        acc += v - first;
        n += 1;
    }
    first + acc / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::symmetric_eigenvalues;

    fn grid2() -> Grid {
        Grid::new(2, 16, &[32, 32], 4.0, &[2.0, 2.0]).unwrap()
    }

    #[test]
    fn constant_kind_has_no_variation() {
        let g = grid2();
        let c = generate_coefficients(CoefficientKind::Constant, 0.5, 1, &g, 0.1).unwrap();
        for axis in 0..=2 {
            assert!(c.variation_along(axis) <= 1e-14);
        }
    }

    #[test]
    fn time_piecewise_is_spatially_constant() {
        let g = grid2();
        let c = generate_coefficients(CoefficientKind::TimePiecewise { n_jumps: 4 }, 0.25, 2, &g, 0.1)
            .unwrap();
        assert!(c.variation_along(1) <= 1e-14 && c.variation_along(2) <= 1e-14);
        assert!(c.variation_along(0) > 0.0);
        assert!(c.max_operator_norm() <= 4.0 * (1.0 + 1e-12));
    }

    #[test]
    fn checkerboard_is_elliptic() {
        let g = grid2();
        let c = generate_coefficients(CoefficientKind::Checkerboard { epsilon: 0.1 }, 0.5, 3, &g, 0.125)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let xi: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n2: f64 = xi.iter().map(|v| v * v).sum();
            for idx in (0..g.len()).step_by(37) {
                let a = c.matrix_at(idx);
                let q: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| a[i * 2 + j] * xi[i] * xi[j]).sum();
                assert!(q >= 0.5 * n2 - 1e-12);
            }
        }
    }

    #[test]
    fn checkerboard_rejects_large_epsilon() {
        let g = grid2();
        match generate_coefficients(CoefficientKind::Checkerboard { epsilon: 0.6 }, 0.5, 3, &g, 0.125) {
            Err(Error::EpsilonTooLarge { max_admissible, .. }) => assert_eq!(max_admissible, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn admissible_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 1..=3 {
            for delta in [0.25, 0.5, 1.0] {
                for _ in 0..50 {
                    let a = random_admissible_matrix(d, delta, &mut rng);
                    assert!(symmetric_eigenvalues(d, &a)[0] >= delta * (1.0 - 1e-12));
                    assert!(crate::operator::operator_norm(d, &a) <= (1.0 / delta) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn checker_time_examples() {
        let g = grid2();
        let tc = generate_coefficients(CoefficientKind::TimePiecewise { n_jumps: 3 }, 0.5, 5, &g, 0.1)
            .unwrap();
        assert!(check_assumption_time(&tc, 0.5).unwrap().gamma_estimate <= 1e-12);
        let c = generate_coefficients(CoefficientKind::Constant, 0.5, 5, &g, 0.1).unwrap();
        assert_eq!(check_assumption_time(&c, 0.5).unwrap().gamma_estimate, 0.0);
        let eps = 0.2;
        let cb = generate_coefficients(CoefficientKind::Checkerboard { epsilon: eps }, 0.5, 5, &g, 0.125)
            .unwrap();
        let rep = check_assumption_time(&cb, 0.5).unwrap();
        assert!(rep.gamma_estimate >= eps / 4.0 && rep.gamma_estimate <= 2.0 * eps, "{}", rep.gamma_estimate);
    }

    #[test]
    fn checker_x1_examples() {
        let g = grid2();
        let xc = generate_coefficients(CoefficientKind::X1Piecewise { n_jumps: 3 }, 0.5, 6, &g, 0.1)
            .unwrap();
        assert!(check_assumption_x1(&xc, 0.5).unwrap().gamma_estimate <= 1e-12);
        let c = generate_coefficients(CoefficientKind::Constant, 0.5, 6, &g, 0.1).unwrap();
        assert_eq!(check_assumption_x1(&c, 0.5).unwrap().gamma_estimate, 0.0);
        let tc = generate_coefficients(CoefficientKind::TimePiecewise { n_jumps: 2 }, 0.5, 6, &g, 0.1)
            .unwrap();
        assert!(check_assumption_x1(&tc, 0.5).unwrap().gamma_estimate > 0.0);
    }

    #[test]
    fn freezing_preserves_structured_inputs() {
        let g = grid2();
        let c = generate_coefficients(CoefficientKind::Constant, 0.5, 7, &g, 0.1).unwrap();
        let cyl = Cylinder::parabolic(0.0, &[0.0, 0.0], 0.5);
        assert_eq!(freeze_time(&c, &cyl).unwrap().entries(), c.entries());
        let tc = generate_coefficients(CoefficientKind::TimePiecewise { n_jumps: 3 }, 0.5, 7, &g, 0.1)
            .unwrap();
        let f = freeze_time(&tc, &cyl).unwrap();
        for (a, b) in f.entries().iter().zip(tc.entries()) {
            assert!((a - b).max_abs() <= 1e-13);
        }
        let xc = generate_coefficients(CoefficientKind::X1Piecewise { n_jumps: 3 }, 0.5, 7, &g, 0.1)
            .unwrap();
        let f = freeze_x1_piecewise(&xc, 0.5, 0.1, &[0.2]).unwrap();
        for (a, b) in f.entries().iter().zip(xc.entries()) {
            assert!((a - b).max_abs() <= 1e-13);
        }
    }

    #[test]
    fn freeze_rejects_oversized_cylinder() {
        let g = grid2();
        let c = generate_coefficients(CoefficientKind::Constant, 0.5, 7, &g, 0.1).unwrap();
        assert!(matches!(
            freeze_time(&c, &Cylinder::parabolic(0.0, &[0.0, 0.0], 1.5)),
            Err(Error::CylinderOutOfRange(_))
        ));
    }
}
