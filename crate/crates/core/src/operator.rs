//! The discrete divergence-form operator `P_λ u = u_t - D⁻_i(a_ij D⁺_j u) + λu`
//! and its right-hand side `D½h + D⁻_i g_i + f`.
//!
//! `D⁺` is the periodic forward difference and `D⁻` the backward one, so
//! `Σ_i inner(D⁺_i u, v_i) = -inner(u, div⁻ v)` holds exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional::{half_derivative, time_derivative};
use crate::grid::{Field, Grid, VectorField};

/// Applies `f(block, out_block)` to each contiguous `n·stride` block along spatial `axis`.
fn spatial_stencil(
    u: &Field,
    axis: usize,
    f: impl Fn(&[f64], &mut [f64], usize, usize) + Sync,
) -> Field {
    let g = u.grid();
    let n = g.n_x(axis);
    let stride = g.spatial_stride(axis);
    let block = n * stride;
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(block)
        .zip(u.data().par_chunks(block))
        .for_each(|(o, i)| f(i, o, n, stride));
    Field::from_vec_unchecked(g, out)
}

/// `(u(x + h e_axis) - u(x)) / h`.
pub fn forward_difference(u: &Field, axis: usize) -> Field {
    let inv_h = 1.0 / u.grid().h(axis);
    spatial_stencil(u, axis, |i, o, n, st| {
        for m in 0..n {
            let next = if m + 1 == n { 0 } else { m + 1 };
            for c in 0..st {
                o[m * st + c] = (i[next * st + c] - i[m * st + c]) * inv_h;
            }
        }
    })
}

/// `(v(x) - v(x - h e_axis)) / h`.
pub fn backward_difference(v: &Field, axis: usize) -> Field {
    let inv_h = 1.0 / v.grid().h(axis);
    spatial_stencil(v, axis, |i, o, n, st| {
        for m in 0..n {
            let prev = if m == 0 { n - 1 } else { m - 1 };
            for c in 0..st {
                o[m * st + c] = (i[m * st + c] - i[prev * st + c]) * inv_h;
            }
        }
    })
}

pub fn gradient_plus(u: &Field) -> VectorField {
    let comps = (0..u.grid().d()).map(|a| forward_difference(u, a)).collect();
    VectorField::new(comps).expect("components share the grid")
}

pub fn divergence_minus(v: &VectorField) -> Result<Field> {
    if v.dim() != v.grid().d() {
        return Err(Error::InvalidArgument(format!(
            "divergence needs {} components, got {}",
            v.grid().d(),
            v.dim()
        )));
    }
    let mut acc = backward_difference(v.component(0), 0);
    for a in 1..v.dim() {
        acc = &acc + &backward_difference(v.component(a), a);
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipticity {
    delta: f64,
}

impl Ellipticity {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ellipticity constant must lie in (0, 1], got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureTag {
    Constant,
    TimeMeasurable,
    X1Measurable,
    General,
}

impl StructureTag {
    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::TimeMeasurable => "time_measurable",
            Self::X1Measurable => "x1_measurable",
            Self::General => "general",
        }
    }
}

/// Eigenvalues of a symmetric `d×d` matrix (row-major), ascending.
pub fn symmetric_eigenvalues(d: usize, m: &[f64]) -> Vec<f64> {
    match d {
        1 => vec![m[0]],
        2 => {
            let (a, b, c) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            vec![mid - rad, mid + rad]
        }
        _ => {
            // Cyclic Jacobi on the symmetric part.
            let mut s = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    s[i][j] = 0.5 * (m[i * 3 + j] + m[j * 3 + i]);
                }
            }
            for _ in 0..50 {
                let off = s[0][1].abs() + s[0][2].abs() + s[1][2].abs();
                if off < 1e-300 {
                    break;
                }
                for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                    if s[p][q] == 0.0 {
                        continue;
                    }
                    let theta = 0.5 * (s[q][q] - s[p][p]) / s[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for k in 0..3 {
                        let (skp, skq) = (s[k][p], s[k][q]);
                        s[k][p] = c * skp - sn * skq;
                        s[k][q] = sn * skp + c * skq;
                    }
                    for k in 0..3 {
                        let (spk, sqk) = (s[p][k], s[q][k]);
                        s[p][k] = c * spk - sn * sqk;
                        s[q][k] = sn * spk + c * sqk;
                    }
                }
            }
            let mut e = vec![s[0][0], s[1][1], s[2][2]];
            e.sort_by(f64::total_cmp);
            e
        }
    }
}

/// Spectral norm of a general `d×d` matrix via the eigenvalues of `MᵀM`.
pub fn operator_norm(d: usize, m: &[f64]) -> f64 {
    let mut mtm = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            mtm[i * d + j] = (0..d).map(|k| m[k * d + i] * m[k * d + j]).sum();
        }
    }
    symmetric_eigenvalues(d, &mtm)
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
        .sqrt()
}

/// Coefficient matrix field `a_ij(t, x)` with a structure tag.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    /// Row-major `d×d` entries, `entries[i * d + j] = a_ij`.
    entries: Vec<Field>,
    tag: StructureTag,
    ellipticity: Ellipticity,
}

const TAG_TOL: f64 = 1e-14;

impl Coefficients {
    /// Validates ellipticity, boundedness and the structure tag.
    pub fn new(entries: Vec<Field>, tag: StructureTag, ellipticity: Ellipticity) -> Result<Self> {
        let grid = *entries
            .first()
            .ok_or_else(|| Error::InvalidArgument("no coefficient entries".into()))?
            .grid();
        let d = grid.d();
        if entries.len() != d * d {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficient entries, got {}",
                d * d,
                entries.len()
            )));
        }
        for e in &entries {
            grid_check(&grid, e)?;
        }
        let c = Self {
            entries,
            tag,
            ellipticity,
        };
        c.check_ellipticity()?;
        c.check_tag()?;
        Ok(c)
    }

    pub fn constant(grid: &Grid, matrix: &[f64], ellipticity: Ellipticity) -> Result<Self> {
        let d = grid.d();
        if matrix.len() != d * d {
            return Err(Error::InvalidArgument("matrix size does not match d".into()));
        }
        let entries = matrix.iter().map(|&v| Field::constant(grid, v)).collect();
        Self::new(entries, StructureTag::Constant, ellipticity)
    }

    pub fn identity(grid: &Grid) -> Self {
        let d = grid.d();
        let m: Vec<f64> = (0..d * d)
            .map(|k| if k / d == k % d { 1.0 } else { 0.0 })
            .collect();
        Self::constant(grid, &m, Ellipticity { delta: 1.0 }).expect("identity is admissible")
    }

    pub fn grid(&self) -> &Grid {
        self.entries[0].grid()
    }

    pub fn d(&self) -> usize {
        self.grid().d()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Field {
        &self.entries[i * self.d() + j]
    }

    pub fn entries(&self) -> &[Field] {
        &self.entries
    }

    pub fn tag(&self) -> StructureTag {
        self.tag
    }

    pub fn ellipticity(&self) -> Ellipticity {
        self.ellipticity
    }

    pub fn delta(&self) -> f64 {
        self.ellipticity.delta
    }

    /// The matrix at flat sample index `idx`.
    pub fn matrix_at(&self, idx: usize) -> Vec<f64> {
        self.entries.iter().map(|e| e.data()[idx]).collect()
    }

    /// Space-time mean of every entry.
    pub fn mean_matrix(&self) -> Vec<f64> {
        self.entries.iter().map(Field::mean).collect()
    }

    /// Largest pointwise spectral norm.
    pub fn max_operator_norm(&self) -> f64 {
        let d = self.d();
        (0..self.grid().len())
            .map(|i| operator_norm(d, &self.matrix_at(i)))
            .fold(0.0, f64::max)
    }

    /// `a + M` for a constant matrix `M`, skipping validation (used by invariance checks).
    pub fn shifted_unchecked(&self, m: &[f64]) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .zip(m)
                .map(|(e, &c)| e.map(|v| v + c))
                .collect(),
            tag: self.tag,
            ellipticity: self.ellipticity,
        }
    }

    /// Replaces the tag after checking it against the data.
    pub fn with_tag(mut self, tag: StructureTag) -> Result<Self> {
        self.tag = tag;
        self.check_tag()?;
        Ok(self)
    }

    fn check_ellipticity(&self) -> Result<()> {
        let d = self.d();
        let delta = self.delta();
        let lower = delta * (1.0 - 1e-12);
        let upper = (1.0 / delta) * (1.0 + 1e-12);
        for idx in 0..self.grid().len() {
            let m = self.matrix_at(idx);
            if let Some(v) = m.iter().find(|v| v.abs() > upper) {
                return Err(Error::Ellipticity {
                    index: idx,
                    reason: format!("|a_ij| = {} exceeds 1/delta = {}", v.abs(), 1.0 / delta),
                });
            }
            let min = symmetric_eigenvalues(d, &m)[0];
            if min < lower {
                return Err(Error::Ellipticity {
                    index: idx,
                    reason: format!("smallest eigenvalue {min} of the symmetric part is below delta = {delta}"),
                });
            }
        }
        Ok(())
    }

    /// Largest variation of any entry along `axis` (0 = time, 1.. = space).
    pub fn variation_along(&self, axis: usize) -> f64 {
        let g = self.grid();
        let s_len = g.spatial_len();
        let mut worst = 0.0f64;
        for e in &self.entries {
            let data = e.data();
            for idx in 0..g.len() {
                let (m_t, s) = (idx / s_len, idx % s_len);
                let next = if axis == 0 {
                    ((m_t + 1) % g.n_t()) * s_len + s
                } else {
                    let a = axis - 1;
                    let st = g.spatial_stride(a);
                    let n = g.n_x(a);
                    let m = (s / st) % n;
                    let s2 = if m + 1 == n { s - m * st } else { s + st };
                    m_t * s_len + s2
                };
                worst = worst.max((data[next] - data[idx]).abs());
            }
        }
        worst
    }

    fn check_tag(&self) -> Result<()> {
        let d = self.d();
        let forbidden: Vec<usize> = match self.tag {
            StructureTag::Constant => (0..=d).collect(),
            StructureTag::TimeMeasurable => (1..=d).collect(),
            StructureTag::X1Measurable => std::iter::once(0).chain(2..=d).collect(),
            StructureTag::General => Vec::new(),
        };
        let scale = self
            .entries
            .iter()
            .map(Field::max_abs)
            .fold(1.0, f64::max);
        for axis in forbidden {
            let v = self.variation_along(axis);
            if v > TAG_TOL * scale {
                return Err(Error::TagMismatch {
                    tag: self.tag.name().into(),
                    axis: if axis == 0 {
                        "t".into()
                    } else {
                        format!("x{axis}")
                    },
                    variation: v,
                });
            }
        }
        Ok(())
    }

    /// `(a w)_i = Σ_j a_ij w_j` pointwise.
    pub fn apply(&self, w: &VectorField) -> Result<VectorField> {
        let d = self.d();
        if w.dim() != d {
            return Err(Error::InvalidArgument("vector dimension mismatch".into()));
        }
        grid_check(self.grid(), w.component(0))?;
        let comps = (0..d)
            .map(|i| {
                let mut acc = self.entry(i, 0).mul(w.component(0))?;
                for j in 1..d {
                    let a = self.entry(i, j).data();
                    let wj = w.component(j).data();
                    for ((o, &aij), &wv) in acc.data_mut().iter_mut().zip(a).zip(wj) {
                        *o += aij * wv;
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(comps)
    }
}

fn grid_check(grid: &Grid, f: &Field) -> Result<()> {
    if f.grid() == grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `F = (h, g, f)` with the reaction parameter `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataBundle {
    pub h: Field,
    pub g: VectorField,
    pub f: Field,
    pub lambda: f64,
}

impl DataBundle {
    pub fn new(h: Field, g: VectorField, f: Field, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        h.same_grid(&f)?;
        grid_check(h.grid(), g.component(0))?;
        if g.dim() != h.grid().d() {
            return Err(Error::InvalidArgument("g must have d components".into()));
        }
        if lambda == 0.0 && !f.is_zero() {
            return Err(Error::InvalidArgument("f must vanish when lambda = 0".into()));
        }
        Ok(Self { h, g, f, lambda })
    }

    pub fn zeros(grid: &Grid, lambda: f64) -> Self {
        Self {
            h: Field::zeros(grid),
            g: VectorField::zeros(grid),
            f: Field::zeros(grid),
            lambda,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.h.grid()
    }

    pub fn is_zero(&self) -> bool {
        self.h.is_zero() && self.f.is_zero() && self.g.components().iter().all(Field::is_zero)
    }
}

/// `U = (D½u, D⁺u, √λ u)` together with `u` itself.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionBundle {
    pub u: Field,
    pub half_du: Field,
    pub grad: VectorField,
    pub lambda: f64,
}

impl SolutionBundle {
    pub fn from_u(u: Field, lambda: f64) -> Self {
        Self {
            half_du: half_derivative(&u),
            grad: gradient_plus(&u),
            u,
            lambda,
        }
    }
}

pub fn apply_operator(coeffs: &Coefficients, lambda: f64, u: &Field) -> Result<Field> {
    grid_check(coeffs.grid(), u)?;
    let flux = coeffs.apply(&gradient_plus(u))?;
    let div = divergence_minus(&flux)?;
    let ut = time_derivative(u);
    Ok(Field::from_vec_unchecked(
        u.grid(),
        ut.data()
            .iter()
            .zip(div.data())
            .zip(u.data())
            .map(|((a, b), c)| a - b + lambda * c)
            .collect(),
    ))
}

pub fn apply_rhs(data: &DataBundle) -> Result<Field> {
    let hd = half_derivative(&data.h);
    let div = divergence_minus(&data.g)?;
    Ok(&(&hd + &div) + &data.f)
}
