//! Parabolic cylinders `Q_{r,s}(t, x) = (t - r², t + r²) × B_s(x)` on the torus.
//!
//! Membership uses minimal-image distances, so a cylinder is only admissible
//! when `r² < l_t/2` and `s < l_i/2` on every axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub t: f64,
    pub x: [f64; MAX_DIM],
    /// Time half-length is `r²`.
    pub r: f64,
    /// Spatial radius.
    pub s: f64,
}

/// Relative slack: samples on the boundary belong to the (closed) cylinder.
const EDGE: f64 = 1e-12;

pub(crate) fn periodic_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

impl Cylinder {
    pub fn new(t: f64, x: &[f64], r: f64, s: f64) -> Self {
        let mut xx = [0.0; MAX_DIM];
        xx[..x.len()].copy_from_slice(x);
        Self { t, x: xx, r, s }
    }

    /// `Q_r = Q_{r,r}`.
    pub fn parabolic(t: f64, x: &[f64], r: f64) -> Self {
        Self::new(t, x, r, r)
    }

    pub fn half_length(&self) -> f64 {
        self.r * self.r
    }

    pub fn check_fits(&self, grid: &Grid) -> Result<()> {
        if !(self.r > 0.0 && self.s > 0.0) {
            return Err(Error::CylinderOutOfRange("radii must be positive".into()));
        }
        if self.half_length() >= grid.l_t() / 2.0 {
            return Err(Error::CylinderOutOfRange(format!(
                "time half-length {} must be below l_t/2 = {}",
                self.half_length(),
                grid.l_t() / 2.0
            )));
        }
        for a in 0..grid.d() {
            if self.s >= grid.l_x(a) / 2.0 {
                return Err(Error::CylinderOutOfRange(format!(
                    "spatial radius {} must be below l_x[{a}]/2 = {}",
                    self.s,
                    grid.l_x(a) / 2.0
                )));
            }
        }
        Ok(())
    }

    /// Time sample indices inside the cylinder.
    pub fn time_indices(&self, grid: &Grid) -> Vec<usize> {
        let lim = self.half_length() * (1.0 + EDGE);
        (0..grid.n_t())
            .filter(|&m| periodic_distance(grid.time_coord(m), self.t, grid.l_t()) < lim)
            .collect()
    }

    /// Spatial flat indices inside the ball.
    pub fn spatial_indices(&self, grid: &Grid) -> Vec<usize> {
        ball_indices(grid, &self.x, self.s, 0)
    }

    /// All flat indices inside the cylinder, time-major.
    pub fn indices(&self, grid: &Grid) -> Vec<usize> {
        let sp = self.spatial_indices(grid);
        let s_len = grid.spatial_len();
        self.time_indices(grid)
            .into_iter()
            .flat_map(|m| sp.iter().map(move |&s| m * s_len + s))
            .collect()
    }

    pub fn contains(&self, grid: &Grid, t: f64, x: &[f64]) -> bool {
        let in_time = periodic_distance(t, self.t, grid.l_t()) < self.half_length() * (1.0 + EDGE);
        let r2: f64 = (0..grid.d())
            .map(|a| periodic_distance(x[a], self.x[a], grid.l_x(a)).powi(2))
            .sum();
        in_time && r2.sqrt() < self.s * (1.0 + EDGE)
    }
}

/// Spatial flat indices within distance `radius` of `center`, restricted to
/// axes `first_axis..d` (earlier axes range over all samples).
pub(crate) fn ball_indices(grid: &Grid, center: &[f64], radius: f64, first_axis: usize) -> Vec<usize> {
    let lim = radius * (1.0 + EDGE);
    (0..grid.spatial_len())
        .filter(|&s| {
            let m = grid.spatial_multi_index(s);
            let r2: f64 = (first_axis..grid.d())
                .map(|a| periodic_distance(grid.space_coord(a, m[a]), center[a], grid.l_x(a)).powi(2))
                .sum();
            r2.sqrt() < lim
        })
        .collect()
}
