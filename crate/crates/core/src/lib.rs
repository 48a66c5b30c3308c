//! Half-time-derivative parabolic operators on periodic space-time grids.
//!
//! The central object is the divergence-form operator
//! `u_t - D_i(a_ij D_j u) + λu` with data `D½h + D_i g_i + f`, discretized on a
//! space-time torus with spectral time symbols and a forward/backward
//! difference pair in space.

pub mod coefficients;
pub mod cylinder;
pub mod error;
pub mod expr;
pub mod fractional;
pub mod grid;
pub mod htpf;
pub mod krylov;
pub mod operator;
pub mod oscillation;
pub mod solver;
pub mod spectrum;

pub use error::{Error, Result};
pub use expr::field_from_expression;
pub use grid::{inner, lp_norm, Field, Grid, VectorField};
pub use spectrum::{inverse_transform_time, transform_time, TimeSpectrum};
