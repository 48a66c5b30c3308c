//! Single solves: iterative (`solve`) or per-mode exact (`oracle`).

use serde::Serialize;

use halfheat::solver::{compute_bundles, relative_residual, solve, solve_oracle};

use super::{coefficients_for, data_for, stream};
use crate::config::{derive_seed, ExperimentConfig};
use crate::report::{num, Outcome, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub lambda: f64,
    pub iterations: usize,
    pub relative_residual: f64,
    pub residual_history: Vec<f64>,
    /// `(p, ‖U‖_p, ‖F‖_p)`.
    pub norms: Vec<(f64, f64, f64)>,
}

pub fn run(cfg: &ExperimentConfig, oracle: bool) -> anyhow::Result<Outcome> {
    let grid = cfg.grid.build()?;
    let lambda = *cfg.lambda.first().ok_or_else(|| anyhow::anyhow!("lambda list is empty"))?;
    let a = coefficients_for(cfg.coefficients.kind, &cfg.coefficients, &grid, derive_seed(cfg.seed, stream::COEFFS, 0))?;
    let data = data_for(&grid, &cfg.data, cfg.seed, lambda)?;
    let result = if oracle {
        solve_oracle(&a, lambda, &data)?
    } else {
        solve(&a, lambda, &data, &cfg.solver)?
    };
    let residual = relative_residual(&a, lambda, &result.bundle.u, &data)?;
    let (_, norms) = compute_bundles(&result.bundle.u, lambda, &data, &cfg.p)?;
    let mut failures = Vec::new();
    let tol = if oracle { 1e-10 } else { cfg.solver.rtol * 10.0 };
    if !(residual <= tol) {
        failures.push(format!("relative residual {residual:e} exceeds {tol:e}"));
    }
    let mut table = Table::new(&["p", "u_norm", "f_norm", "ratio", "iterations", "relative_residual"]);
    for n in &norms {
        table.push(vec![
            num(n.p),
            num(n.u_norm),
            num(n.f_norm),
            crate::report::opt(n.ratio()),
            result.iterations.to_string(),
            num(residual),
        ]);
    }
    let report = SolveReport {
        lambda,
        iterations: result.iterations,
        relative_residual: residual,
        residual_history: result.residual_history.clone(),
        norms: norms.iter().map(|n| (n.p, n.u_norm, n.f_norm)).collect(),
    };
    let mut outcome = Outcome::new(report, table, failures);
    outcome.fields = vec![
        ("u".into(), result.bundle.u),
        ("half_du".into(), result.bundle.half_du),
    ];
    Ok(outcome)
}
