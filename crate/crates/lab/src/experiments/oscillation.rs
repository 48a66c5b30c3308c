//! Mean-oscillation decay in κ for the three solution bundles, and the local estimate.

use serde::Serialize;

use halfheat::coefficients::CoefficientKind;
use halfheat::operator::{Coefficients, DataBundle, Ellipticity, StructureTag};
use halfheat::oscillation::{
    manufactured_local_problem, verify_local_estimate, verify_mean_oscillation, LocalEstimateReport,
    OscillationCase, OscillationReport,
};
use halfheat::solver::{solve, solve_oracle};
use halfheat::{Field, Grid, VectorField};

use super::{coefficients_for, stream};
use crate::config::{derive_seed, ExperimentConfig};
use crate::report::{num, opt, Outcome, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalEstimateSummary {
    pub base: LocalEstimateReport,
    pub doubled_n_t: LocalEstimateReport,
    pub rescaled: LocalEstimateReport,
    pub refinement_change: Option<f64>,
    pub rescaling_change: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationBundle {
    pub cases: Vec<OscillationReport>,
    pub local_estimate: Option<LocalEstimateSummary>,
}

fn smooth_ramp(r: f64, inner: f64) -> f64 {
    let s = ((r - inner) / 0.4).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Data supported in `|x| ≥ source_radius`.
pub fn far_data(grid: &Grid, source_radius: f64, lambda: f64) -> anyhow::Result<DataBundle> {
    let tau = std::f64::consts::TAU;
    let lt = grid.l_t();
    let d = grid.d();
    let profile = |p: &halfheat::grid::SamplePoint| {
        smooth_ramp(p.x[..d].iter().map(|v| v * v).sum::<f64>().sqrt(), source_radius)
    };
    let h = Field::from_fn(grid, |p| (tau * p.t / lt).sin() * profile(p))?;
    let g = (0..d)
        .map(|i| Field::from_fn(grid, |p| 0.5 * (tau * p.t / lt + i as f64).cos() * profile(p)))
        .collect::<halfheat::Result<Vec<_>>>()?;
    let f = if lambda > 0.0 {
        Field::from_fn(grid, |p| (1.0 + 0.5 * (tau * p.t / lt).cos()) * profile(p))?
    } else {
        Field::zeros(grid)
    };
    Ok(DataBundle::new(h, VectorField::new(g)?, f, lambda)?)
}

/// Diagonal coefficients `a_ii = lo` for `x₁ < 0` and `hi` for `x₁ ≥ 0` (interface through the origin).
pub fn x1_interface_coefficients(grid: &Grid, lo: f64, hi: f64, delta: f64) -> anyhow::Result<Coefficients> {
    let d = grid.d();
    let entries = (0..d * d)
        .map(|k| {
            Field::from_fn(grid, |p| {
                if k / d != k % d {
                    0.0
                } else if p.x[0] < 0.0 {
                    lo
                } else {
                    hi
                }
            })
        })
        .collect::<halfheat::Result<Vec<_>>>()?;
    Ok(Coefficients::new(entries, StructureTag::X1Measurable, Ellipticity::new(delta)?)?)
}

fn local_report(grid: Grid, lambda: f64, width: f64, rho: f64, radius: f64) -> anyhow::Result<LocalEstimateReport> {
    let a = Coefficients::identity(&grid);
    let (u, data) = manufactured_local_problem(&a, lambda, width, rho)?;
    Ok(verify_local_estimate(&a, lambda, &data, &u, radius, 1e-10)?)
}

fn change(a: &LocalEstimateReport, b: &LocalEstimateReport) -> Option<f64> {
    Some((b.n_emp? / a.n_emp? - 1.0).abs())
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let grid = cfg.grid.build()?;
    let spec = &cfg.oscillation;
    let lambda = *cfg.lambda.first().ok_or_else(|| anyhow::anyhow!("lambda list is empty"))?;
    if lambda <= 0.0 {
        anyhow::bail!("oscillation experiments need lambda > 0");
    }
    let data = far_data(&grid, spec.source_radius, lambda)?;
    let origin = vec![0.0; grid.d()];
    let check_rtol = (10.0 * cfg.solver.rtol).max(1e-10);
    let mut failures = Vec::new();
    let mut cases = Vec::new();
    for &case in &spec.cases {
        let a = match case {
            OscillationCase::CalUTimeCoeffs => coefficients_for(
                CoefficientKind::TimePiecewise { n_jumps: 3 },
                &cfg.coefficients,
                &grid,
                derive_seed(cfg.seed, stream::COEFFS, 0),
            )?,
            OscillationCase::UHeat => Coefficients::identity(&grid),
            OscillationCase::CalUPrimeThetaX1 => {
                let delta = cfg.coefficients.delta;
                x1_interface_coefficients(&grid, 1.0, (1.0 / delta).min(3.0), delta)?
            }
        };
        let u = match case {
            OscillationCase::UHeat => solve_oracle(&a, lambda, &data)?.bundle.u,
            _ => solve(&a, lambda, &data, &cfg.solver)?.bundle.u,
        };
        let rep = verify_mean_oscillation(
            case,
            &a,
            lambda,
            &data,
            &u,
            &spec.kappa,
            spec.outer_radius,
            (0.0, &origin),
            check_rtol,
        )?;
        let limit = match case {
            OscillationCase::CalUPrimeThetaX1 => spec.slope_limit_x1,
            _ => spec.slope_limit_full,
        };
        let any_oscillation = rep.rows.iter().any(|r| r.oscillation > 0.0);
        match rep.fitted_slope {
            Some(s) if !(s <= limit) => {
                failures.push(format!("{}: decay exponent {s} exceeds {limit}", case.name()))
            }
            None if any_oscillation => failures.push(format!("{}: decay exponent undefined", case.name())),
            _ => {}
        }
        cases.push(rep);
    }

    let local_estimate = if spec.local_estimate && !data.is_zero() {
        let radius = spec.outer_radius;
        let (width, rho) = (0.25 * radius * radius, 0.8 * radius);
        let base = local_report(grid, lambda, width, rho, radius)?;
        let mut fine = cfg.grid.clone();
        fine.n_t *= 2;
        let doubled_n_t = local_report(fine.build()?, lambda, width, rho, radius)?;
        let rescaled = local_report(grid.stretched(4.0, 2.0)?, lambda / 4.0, 4.0 * width, 2.0 * rho, 2.0 * radius)?;
        let refinement_change = change(&base, &doubled_n_t);
        let rescaling_change = change(&base, &rescaled);
        if !refinement_change.is_some_and(|c| c <= 0.2) {
            failures.push(format!("local estimate: N_emp changes by {refinement_change:?} under doubling n_t"));
        }
        if !rescaling_change.is_some_and(|c| c <= 0.05) {
            failures.push(format!("local estimate: N_emp changes by {rescaling_change:?} under parabolic rescaling"));
        }
        Some(LocalEstimateSummary {
            base,
            doubled_n_t,
            rescaled,
            refinement_change,
            rescaling_change,
        })
    } else {
        None
    };

    let mut table = Table::new(&[
        "case", "kappa", "r", "oscillation", "outer_rms", "homogeneous_term", "data_term",
        "empirical_constant", "fitted_slope",
    ]);
    for rep in &cases {
        for r in &rep.rows {
            table.push(vec![
                rep.case.name().into(),
                num(r.kappa),
                num(r.r),
                num(r.oscillation),
                num(r.outer_rms),
                num(r.homogeneous_term),
                num(r.data_term),
                opt(r.empirical_constant),
                opt(rep.fitted_slope),
            ]);
        }
    }
    Ok(Outcome::new(OscillationBundle { cases, local_estimate }, table, failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;

    #[test]
    fn zero_data_gives_zero_report() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Oscillation);
        cfg.grid.n_t = 64;
        cfg.grid.n_x = vec![64];
        cfg.oscillation.source_radius = 10.0;
        let out = run(&cfg).unwrap();
        assert!(out.passed(), "{:?}", out.failures);
        for case in out.results["cases"].as_array().unwrap() {
            for row in case["rows"].as_array().unwrap() {
                assert_eq!(row["oscillation"], 0.0);
            }
        }
    }

    #[test]
    fn interface_coefficients_are_x1_measurable() {
        let g = Grid::new(2, 8, &[8, 8], 1.0, &[2.0, 2.0]).unwrap();
        let a = x1_interface_coefficients(&g, 1.0, 3.0, 0.25).unwrap();
        assert_eq!(a.variation_along(0), 0.0);
        assert_eq!(a.variation_along(2), 0.0);
        assert!(a.variation_along(1) > 0.0);
    }
}
