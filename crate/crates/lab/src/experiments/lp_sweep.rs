//! `L_p` ratio sweep over `(p, λ, coefficient kind)` with a grid-refinement check.

use serde::Serialize;

use halfheat::coefficients::CoefficientKind;
use halfheat::fractional::{half_derivative, hilbert};
use halfheat::operator::DataBundle;
use halfheat::solver::{compute_bundles, solve};
use halfheat::{Field, Grid, VectorField};

use super::{coefficients_for, par_trials, rel_dev, stream, trig_field};
use crate::config::{derive_seed, ExperimentConfig};
use crate::report::{num, Outcome, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub kind: CoefficientKind,
    pub lambda: f64,
    pub trial: usize,
    pub trial_seed: u64,
    /// 0 for the base grid, 1 for the doubled grid.
    pub level: usize,
    pub p: f64,
    pub u_norm: f64,
    pub f_norm: f64,
    pub ratio: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityEntry {
    pub kind: Option<CoefficientKind>,
    pub p: f64,
    pub max_ratio_base: f64,
    pub max_ratio_doubled: Option<f64>,
    /// `max ratio (doubled) / max ratio (base)`.
    pub stability_factor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaZero {
    pub kind: CoefficientKind,
    pub p: f64,
    /// Smallest swept λ beyond which the max ratio moves by at most 10% per λ-doubling.
    pub lambda0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub stability: Vec<StabilityEntry>,
    pub per_kind_stability: Vec<StabilityEntry>,
    pub lambda0: Vec<LambdaZero>,
    pub duality_worst: f64,
    pub largest_stable_checkerboard_epsilon: Option<f64>,
    pub all_finite: bool,
}

struct Job {
    kind: CoefficientKind,
    lambda: f64,
    trial: usize,
}

/// Smooth data identical (as a continuous function) on every grid.
fn sweep_data(grid: &Grid, seed: u64, lambda: f64) -> anyhow::Result<DataBundle> {
    let f = |s| trig_field(grid, derive_seed(seed, stream::DATA, s), 6, 3);
    let g = VectorField::new((0..grid.d()).map(|i| f(1 + i as u64)).collect())?;
    Ok(DataBundle::new(f(0), g, f(9), lambda)?)
}

/// Ratio of consecutive maxima per λ-doubling, normalized to one doubling.
pub fn estimate_lambda0(lambdas: &[f64], max_ratios: &[f64]) -> Option<f64> {
    let n = lambdas.len();
    let stable = |i: usize| {
        let doublings = (lambdas[i + 1] / lambdas[i]).log2();
        let change = (max_ratios[i + 1] / max_ratios[i]).powf(1.0 / doublings);
        (change - 1.0).abs() <= 0.1
    };
    (0..n).find(|&i| (i..n.saturating_sub(1)).all(stable)).map(|i| lambdas[i])
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let spec = &cfg.lp_sweep;
    if cfg.lambda.iter().any(|l| *l <= 0.0) {
        anyhow::bail!("lp sweep needs lambda > 0");
    }
    let mut lambdas = cfg.lambda.clone();
    lambdas.sort_by(f64::total_cmp);
    let grids = {
        let base = cfg.grid.build()?;
        let mut v = vec![base];
        if spec.refine {
            v.push(cfg.grid.doubled().build()?);
        }
        v
    };
    let jobs: Vec<Job> = spec
        .kinds
        .iter()
        .flat_map(|&kind| {
            lambdas
                .iter()
                .flat_map(move |&lambda| (0..cfg.trials).map(move |trial| Job { kind, lambda, trial }))
        })
        .collect();

    let results = par_trials(jobs.len(), |j| -> anyhow::Result<(Vec<SweepRow>, Field)> {
        let job = &jobs[j];
        let seed = derive_seed(cfg.seed, stream::FIELD, job.trial as u64);
        let mut rows = Vec::new();
        let mut base_u = None;
        for (level, grid) in grids.iter().enumerate() {
            let a = coefficients_for(job.kind, &cfg.coefficients, grid, derive_seed(seed, stream::COEFFS, 0))?;
            let data = sweep_data(grid, seed, job.lambda)?;
            let solved = solve(&a, job.lambda, &data, &cfg.solver)?;
            let (_, norms) = compute_bundles(&solved.bundle.u, job.lambda, &data, &cfg.p)?;
            for n in norms {
                rows.push(SweepRow {
                    kind: job.kind,
                    lambda: job.lambda,
                    trial: job.trial,
                    trial_seed: seed,
                    level,
                    p: n.p,
                    u_norm: n.u_norm,
                    f_norm: n.f_norm,
                    ratio: n.ratio().unwrap_or(f64::NAN),
                    iterations: solved.iterations,
                });
            }
            if level == 0 {
                base_u = Some(solved.bundle.u);
            }
        }
        Ok((rows, base_u.expect("base grid solved")))
    });

    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok((rs, u)) => {
                rows.extend(rs);
                solutions.push(u);
            }
            Err(e) => failures.push(format!(
                "{:?}, lambda {}, trial {}: {e}",
                job.kind, job.lambda, job.trial
            )),
        }
    }

    let all_finite = rows.iter().all(|r| r.ratio.is_finite());
    if !all_finite {
        failures.push("non-finite ratio in the sweep".into());
    }

    // Skewness of H D½ on every consecutive pair of solved fields.
    let duality_worst = solutions
        .windows(2)
        .map(|w| {
            let du = half_derivative(&w[0]);
            let dv = half_derivative(&w[1]);
            let a = hilbert(&dv).inner(&du).unwrap();
            let b = hilbert(&du).inner(&dv).unwrap();
            rel_dev(a + b, 2.0 * du.l2_norm() * dv.l2_norm())
        })
        .fold(0.0, f64::max);
    if duality_worst > 1e-12 {
        failures.push(format!("duality skewness deviation {duality_worst:e}"));
    }

    let max_of = |kind: Option<CoefficientKind>, p: f64, level: usize| {
        rows.iter()
            .filter(|r| r.p == p && r.level == level && kind.is_none_or(|k| r.kind == k))
            .map(|r| r.ratio)
            .fold(f64::NAN, f64::max)
    };
    let entry = |kind: Option<CoefficientKind>, p: f64| {
        let base = max_of(kind, p, 0);
        let doubled = spec.refine.then(|| max_of(kind, p, 1));
        StabilityEntry {
            kind,
            p,
            max_ratio_base: base,
            max_ratio_doubled: doubled,
            stability_factor: doubled.map(|d| d / base),
        }
    };
    let stability: Vec<StabilityEntry> = cfg.p.iter().map(|&p| entry(None, p)).collect();
    for s in &stability {
        if let Some(f) = s.stability_factor {
            if !(f <= spec.stability_limit) {
                failures.push(format!(
                    "p = {}: refinement stability factor {f} exceeds {}",
                    s.p, spec.stability_limit
                ));
            }
        }
    }
    let per_kind_stability: Vec<StabilityEntry> = spec
        .kinds
        .iter()
        .flat_map(|&k| cfg.p.iter().map(move |&p| (k, p)))
        .map(|(k, p)| entry(Some(k), p))
        .collect();

    let lambda0 = spec
        .kinds
        .iter()
        .flat_map(|&k| cfg.p.iter().map(move |&p| (k, p)))
        .map(|(kind, p)| {
            let maxima: Vec<f64> = lambdas
                .iter()
                .map(|&l| {
                    rows.iter()
                        .filter(|r| r.kind == kind && r.p == p && r.level == 0 && r.lambda == l)
                        .map(|r| r.ratio)
                        .fold(f64::NAN, f64::max)
                })
                .collect();
            LambdaZero {
                kind,
                p,
                lambda0: estimate_lambda0(&lambdas, &maxima),
            }
        })
        .collect();

    let largest_stable_checkerboard_epsilon = spec
        .kinds
        .iter()
        .filter_map(|k| match k {
            CoefficientKind::Checkerboard { epsilon } => {
                let stable = per_kind_stability
                    .iter()
                    .filter(|s| s.kind == Some(*k))
                    .all(|s| s.stability_factor.is_some_and(|f| f <= spec.stability_limit));
                stable.then_some(*epsilon)
            }
            _ => None,
        })
        .reduce(f64::max);

    let mut table = Table::new(&["kind", "lambda", "trial", "trial_seed", "level", "p", "u_norm", "f_norm", "ratio", "iterations"]);
    for r in &rows {
        table.push(vec![
            kind_label(r.kind),
            num(r.lambda),
            r.trial.to_string(),
            r.trial_seed.to_string(),
            r.level.to_string(),
            num(r.p),
            num(r.u_norm),
            num(r.f_norm),
            num(r.ratio),
            r.iterations.to_string(),
        ]);
    }
    let report = SweepReport {
        rows,
        stability,
        per_kind_stability,
        lambda0,
        duality_worst,
        largest_stable_checkerboard_epsilon,
        all_finite,
    };
    Ok(Outcome::new(report, table, failures))
}

pub fn kind_label(kind: CoefficientKind) -> String {
    match kind {
        CoefficientKind::Constant => "constant".into(),
        CoefficientKind::TimePiecewise { n_jumps } => format!("time_piecewise:{n_jumps}"),
        CoefficientKind::X1Piecewise { n_jumps } => format!("x1_piecewise:{n_jumps}"),
        CoefficientKind::Checkerboard { epsilon } => format!("checkerboard:{epsilon}"),
        CoefficientKind::Smooth => "smooth".into(),
    }
}
