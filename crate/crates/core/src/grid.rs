//! Periodic space-time lattices and the real fields sampled on them.
//!
//! Samples are stored row-major with time as the slowest index, i.e. the
//! flat index of `(m_t, m_1, .., m_d)` is `m_t * S + spatial(m_1, .., m_d)`
//! with `S` the number of spatial samples. Coordinates are centred: the time
//! axis covers `[-l_t/2, l_t/2)` and sample `m` sits at `(m - n_t/2) * dt`,
//! so the origin is always a grid point.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible sample count unless a cap is passed explicitly.
pub const DEFAULT_SAMPLE_CAP: usize = 1 << 24;

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    n_t: usize,
    n_x: [usize; MAX_DIM],
    l_t: f64,
    l_x: [f64; MAX_DIM],
}

fn check_count(name: &str, n: usize) -> Result<()> {
    if n % 2 != 0 {
        return Err(Error::InvalidGrid(format!("{name} must be even")));
    }
    if n < 8 {
        return Err(Error::InvalidGrid(format!("{name} must be at least 8")));
    }
    Ok(())
}

impl Grid {
    pub fn new(d: usize, n_t: usize, n_x: &[usize], l_t: f64, l_x: &[f64]) -> Result<Self> {
        Self::with_cap(d, n_t, n_x, l_t, l_x, DEFAULT_SAMPLE_CAP)
    }

    pub fn with_cap(
        d: usize,
        n_t: usize,
        n_x: &[usize],
        l_t: f64,
        l_x: &[f64],
        cap: usize,
    ) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension must be 1..=3, got {d}"
            )));
        }
        if n_x.len() != d || l_x.len() != d {
            return Err(Error::InvalidGrid(format!(
                "expected {d} spatial sizes and periods, got {} and {}",
                n_x.len(),
                l_x.len()
            )));
        }
        check_count("n_t", n_t)?;
        for (i, &n) in n_x.iter().enumerate() {
            check_count(&format!("n_x[{i}]"), n)?;
        }
        if !(l_t.is_finite() && l_t > 0.0) {
            return Err(Error::InvalidGrid("l_t must be positive".into()));
        }
        if l_x.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidGrid("spatial periods must be positive".into()));
        }
        let total = n_x
            .iter()
            .try_fold(n_t, |acc, &n| acc.checked_mul(n))
            .filter(|&t| t <= cap)
            .ok_or_else(|| Error::InvalidGrid(format!("sample count exceeds cap {cap}")))?;
        debug_assert!(total > 0);

        let mut nx = [1; MAX_DIM];
        let mut lx = [1.0; MAX_DIM];
        nx[..d].copy_from_slice(n_x);
        lx[..d].copy_from_slice(l_x);
        Ok(Self {
            d,
            n_t,
            n_x: nx,
            l_t,
            l_x: lx,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_x(&self, axis: usize) -> usize {
        self.n_x[axis]
    }

    pub fn n_x_all(&self) -> &[usize] {
        &self.n_x[..self.d]
    }

    pub fn l_t(&self) -> f64 {
        self.l_t
    }

    pub fn l_x(&self, axis: usize) -> f64 {
        self.l_x[axis]
    }

    pub fn l_x_all(&self) -> &[f64] {
        &self.l_x[..self.d]
    }

    pub fn dt(&self) -> f64 {
        self.l_t / self.n_t as f64
    }

    /// Spatial spacing along `axis` (0-based).
    pub fn h(&self, axis: usize) -> f64 {
        self.l_x[axis] / self.n_x[axis] as f64
    }

    /// Number of spatial samples per time slice.
    pub fn spatial_len(&self) -> usize {
        self.n_x[..self.d].iter().product()
    }

    pub fn len(&self) -> usize {
        self.n_t * self.spatial_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `dt * h_1 * .. * h_d`, the weight of every sample in quadratures.
    pub fn cell_measure(&self) -> f64 {
        (0..self.d).fold(self.dt(), |acc, i| acc * self.h(i))
    }

    pub fn volume(&self) -> f64 {
        self.l_x[..self.d].iter().product::<f64>() * self.l_t
    }

    /// Sizes of all `d + 1` axes, time first.
    pub fn shape(&self) -> Vec<usize> {
        std::iter::once(self.n_t)
            .chain(self.n_x[..self.d].iter().copied())
            .collect()
    }

    /// Periods of all `d + 1` axes, time first.
    pub fn periods(&self) -> Vec<f64> {
        std::iter::once(self.l_t)
            .chain(self.l_x[..self.d].iter().copied())
            .collect()
    }

    /// Flat-index stride of spatial `axis` within one time slice.
    pub fn spatial_stride(&self, axis: usize) -> usize {
        self.n_x[axis + 1..self.d].iter().product()
    }

    pub fn time_coord(&self, m: usize) -> f64 {
        (m as f64 - (self.n_t / 2) as f64) * self.dt()
    }

    pub fn space_coord(&self, axis: usize, m: usize) -> f64 {
        (m as f64 - (self.n_x[axis] / 2) as f64) * self.h(axis)
    }

    /// Splits a spatial flat index into per-axis indices.
    pub fn spatial_multi_index(&self, mut s: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for axis in (0..self.d).rev() {
            out[axis] = s % self.n_x[axis];
            s /= self.n_x[axis];
        }
        out
    }

    pub fn spatial_flat_index(&self, m: &[usize]) -> usize {
        (0..self.d).fold(0, |acc, axis| acc * self.n_x[axis] + m[axis])
    }

    /// Coordinates of the sample at flat index `idx`.
    pub fn point(&self, idx: usize) -> SamplePoint {
        let s_len = self.spatial_len();
        let m_t = idx / s_len;
        let ms = self.spatial_multi_index(idx % s_len);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.d {
            x[axis] = self.space_coord(axis, ms[axis]);
        }
        SamplePoint {
            t: self.time_coord(m_t),
            x,
        }
    }

    /// Same periods, every sample count doubled.
    pub fn refined(&self) -> Result<Self> {
        let n_x: Vec<usize> = self.n_x_all().iter().map(|n| 2 * n).collect();
        Self::new(self.d, 2 * self.n_t, &n_x, self.l_t, self.l_x_all())
    }

    /// Same sample counts, periods stretched by the given factors.
    pub fn stretched(&self, time_factor: f64, space_factor: f64) -> Result<Self> {
        let l_x: Vec<f64> = self.l_x_all().iter().map(|l| l * space_factor).collect();
        Self::new(
            self.d,
            self.n_t,
            self.n_x_all(),
            self.l_t * time_factor,
            &l_x,
        )
    }
}

/// Coordinates of one lattice sample; unused spatial slots are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub t: f64,
    pub x: [f64; MAX_DIM],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            grid: *grid,
            data: vec![c; grid.len()],
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid: *grid, data })
    }

    /// Callers guarantee length and finiteness.
    pub(crate) fn from_vec_unchecked(grid: &Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid: *grid, data }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&SamplePoint) -> f64) -> Result<Self> {
        let data = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::from_vec(grid, data)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec_unchecked(&self.grid, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field::from_vec_unchecked(
            &self.grid,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Rectangle-rule `L_p` norm; `p = f64::INFINITY` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_of(&self.grid, self.data.iter().map(|v| v.abs()), p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).map(f64::sqrt).unwrap_or(0.0)
    }

    /// Discrete `∫ a b dX`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_measure())
    }

    /// Sample values along the time axis at spatial index `s`.
    pub fn time_line(&self, s: usize) -> Vec<f64> {
        let sl = self.grid.spatial_len();
        (0..self.grid.n_t()).map(|m| self.data[m * sl + s]).collect()
    }
}

pub fn inner(a: &Field, b: &Field) -> Result<f64> {
    a.inner(b)
}

pub fn lp_norm(field: &Field, p: f64) -> Result<f64> {
    field.lp_norm(p)
}

fn lp_norm_of(grid: &Grid, magnitudes: impl Iterator<Item = f64>, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("L_p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(magnitudes.fold(0.0, f64::max));
    }
    let w = grid.cell_measure();
    if p == 2.0 {
        return Ok((magnitudes.map(|v| v * v).sum::<f64>() * w).sqrt());
    }
    let s: f64 = magnitudes.map(|v| v.powf(p)).sum();
    Ok((s * w).powf(1.0 / p))
}

/// `L_p` norm of the pointwise Euclidean magnitude of a list of fields.
pub fn bundle_lp_norm(components: &[&Field], p: f64) -> Result<f64> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty component list".into()))?;
    for c in components {
        first.same_grid(c)?;
    }
    let mag = pointwise_magnitude(components)?;
    lp_norm_of(first.grid(), mag.data.iter().copied(), p)
}

/// `sqrt(Σ_c c(X)^2)` at every sample.
pub fn pointwise_magnitude(components: &[&Field]) -> Result<Field> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty component list".into()))?;
    let mut acc = vec![0.0; first.grid().len()];
    for c in components {
        first.same_grid(c)?;
        for (a, v) in acc.iter_mut().zip(c.data()) {
            *a += v * v;
        }
    }
    for a in &mut acc {
        *a = a.sqrt();
    }
    Ok(Field::from_vec_unchecked(first.grid(), acc))
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in Field + Field")
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in Field - Field")
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scale(rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

/// `d` scalar fields on one grid, e.g. the flux data `g` or a gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<Field>,
}

impl VectorField {
    pub fn new(components: Vec<Field>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("vector field needs a component".into()))?;
        for c in &components[1..] {
            first.same_grid(c)?;
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            components: (0..grid.d()).map(|_| Field::zeros(grid)).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &Field {
        &self.components[i]
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Field> {
        self.components
    }

    pub fn map_components(&self, f: impl Fn(&Field) -> Field) -> VectorField {
        Self {
            components: self.components.iter().map(f).collect(),
        }
    }

    /// `Σ_i inner(a_i, b_i)`.
    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::InvalidArgument("vector field dimension mismatch".into()));
        }
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).map(f64::sqrt).unwrap_or(0.0)
    }

    pub fn component_refs(&self) -> Vec<&Field> {
        self.components.iter().collect()
    }
}
