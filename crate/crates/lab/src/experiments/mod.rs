//! Experiments; each returns an [`Outcome`](crate::report::Outcome).

pub mod assumptions;
pub mod identities;
pub mod l2;
pub mod lp_sweep;
pub mod oscillation;
pub mod solve;
pub mod tail;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use halfheat::coefficients::{generate_coefficients, CoefficientKind};
use halfheat::expr::{field_from_expression, noise_field};
use halfheat::operator::{Coefficients, DataBundle};
use halfheat::{Field, Grid, VectorField};

use crate::config::{derive_seed, CoefficientSpec, DataSpec, ExperimentConfig, ExperimentKind};
use crate::report::Outcome;

/// Seed streams, so different random objects of one trial never share a seed.
pub(crate) mod stream {
    pub const COEFFS: u64 = 1;
    pub const DATA: u64 = 2;
    pub const FIELD: u64 = 3;
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    match cfg.experiment {
        ExperimentKind::Identities => identities::run(cfg),
        ExperimentKind::L2 => l2::run(cfg),
        ExperimentKind::LpSweep => lp_sweep::run(cfg),
        ExperimentKind::TailDecay => tail::run(cfg),
        ExperimentKind::Oscillation => oscillation::run(cfg),
        ExperimentKind::Assumptions => assumptions::run(cfg),
        ExperimentKind::Solve => solve::run(cfg, false),
        ExperimentKind::Oracle => solve::run(cfg, true),
    }
}

/// Ordered parallel map over trial indices.
pub(crate) fn par_trials<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

pub(crate) fn coefficients_for(
    kind: CoefficientKind,
    spec: &CoefficientSpec,
    grid: &Grid,
    seed: u64,
) -> halfheat::Result<Coefficients> {
    generate_coefficients(kind, spec.delta, seed, grid, spec.roughness_scale)
}

/// `F = (h, g, f)` from expressions when given, seeded noise otherwise; `f = 0` when `λ = 0`.
pub(crate) fn data_for(grid: &Grid, spec: &DataSpec, seed: u64, lambda: f64) -> anyhow::Result<DataBundle> {
    let pick = |expr: &str, idx: u64| -> anyhow::Result<Field> {
        if expr.is_empty() {
            Ok(noise_field(grid, derive_seed(seed, stream::DATA, idx), spec.band))
        } else {
            Ok(field_from_expression(grid, expr)?)
        }
    };
    let h = pick(&spec.h, 0)?;
    let g = (0..grid.d())
        .map(|i| pick(spec.g.get(i).map(String::as_str).unwrap_or(""), 1 + i as u64))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let f = if lambda > 0.0 { pick(&spec.f, 9)? } else { Field::zeros(grid) };
    Ok(DataBundle::new(h, VectorField::new(g)?, f, lambda)?)
}

/// A random trigonometric polynomial of low degree, evaluated exactly at the
/// samples, so refined grids see the same continuous function.
pub(crate) fn trig_field(grid: &Grid, seed: u64, modes: usize, max_wavenumber: i64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.d();
    let terms: Vec<(Vec<i64>, f64, f64)> = (0..modes)
        .map(|_| {
            let k: Vec<i64> = (0..=d).map(|_| rng.random_range(-max_wavenumber..=max_wavenumber)).collect();
            let amp = rng.random_range(-1.0..1.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (k, amp, phase)
        })
        .collect();
    let tau = std::f64::consts::TAU;
    Field::from_fn(grid, |p| {
        terms
            .iter()
            .map(|(k, amp, phase)| {
                let mut arg = tau * k[0] as f64 * p.t / grid.l_t() + phase;
                for a in 0..d {
                    arg += tau * k[a + 1] as f64 * p.x[a] / grid.l_x(a);
                }
                amp * arg.cos()
            })
            .sum()
    })
    .expect("finite trigonometric sums")
}

/// `|a - b| / scale`, with `0/0 = 0`.
pub(crate) fn rel_dev(diff: f64, scale: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        diff.abs() / scale
    }
}
