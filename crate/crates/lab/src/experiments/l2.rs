//! `L₂` estimate trials: `‖U‖₂/‖F‖₂` against the per-mode multiplier bound.

use serde::Serialize;

use halfheat::operator::StructureTag;
use halfheat::solver::{compute_bundles, multiplier_bound, relative_residual, solve, solve_oracle};

use super::{coefficients_for, data_for, par_trials, stream};
use crate::config::{derive_seed, ExperimentConfig};
use crate::report::{num, opt, Outcome, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L2Trial {
    pub trial: usize,
    pub trial_seed: u64,
    pub lambda: f64,
    /// `(p, ‖U‖_p, ‖F‖_p)` for every configured p (2 always included).
    pub norms: Vec<(f64, f64, f64)>,
    pub ratio: Option<f64>,
    pub multiplier_bound: Option<f64>,
    pub oracle_residual: Option<f64>,
    pub iterations: usize,
    /// `‖u_gmres - u_oracle‖₂ / ‖u_oracle‖₂` on constant coefficients.
    pub iterative_vs_oracle: Option<f64>,
    pub trivial: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L2Report {
    pub trials: Vec<L2Trial>,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub max_multiplier_bound: Option<f64>,
}

pub fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn is_identity(m: &[f64], d: usize) -> bool {
    (0..d * d).all(|k| m[k] == if k / d == k % d { 1.0 } else { 0.0 })
}

fn run_trial(cfg: &ExperimentConfig, i: usize) -> anyhow::Result<L2Trial> {
    let grid = cfg.grid.build()?;
    let lambda = cfg.lambda[i % cfg.lambda.len()];
    let seed = derive_seed(cfg.seed, stream::FIELD, i as u64);
    let a = coefficients_for(cfg.coefficients.kind, &cfg.coefficients, &grid, derive_seed(seed, stream::COEFFS, 0))?;
    let data = data_for(&grid, &cfg.data, seed, lambda)?;
    let constant = a.tag() == StructureTag::Constant;
    let solved = solve(&a, lambda, &data, &cfg.solver)?;
    let (u, oracle_residual, iterative_vs_oracle, bound) = if constant {
        let oracle = solve_oracle(&a, lambda, &data)?;
        let res = relative_residual(&a, lambda, &oracle.bundle.u, &data)?;
        let diff = (&solved.bundle.u - &oracle.bundle.u).l2_norm();
        let scale = oracle.bundle.u.l2_norm();
        let rel = if diff == 0.0 { 0.0 } else { diff / scale };
        (oracle.bundle.u, Some(res), Some(rel), Some(multiplier_bound(&a, lambda)?))
    } else {
        (solved.bundle.u, None, None, None)
    };
    let mut ps = cfg.p.clone();
    if !ps.contains(&2.0) {
        ps.insert(0, 2.0);
    }
    let (_, norms) = compute_bundles(&u, lambda, &data, &ps)?;
    let ratio = norms.iter().find(|n| n.p == 2.0).and_then(|n| n.ratio());
    Ok(L2Trial {
        trial: i,
        trial_seed: seed,
        lambda,
        norms: norms.iter().map(|n| (n.p, n.u_norm, n.f_norm)).collect(),
        ratio,
        multiplier_bound: bound,
        oracle_residual,
        iterations: solved.iterations,
        iterative_vs_oracle,
        trivial: data.is_zero(),
        error: None,
    })
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    if cfg.lambda.iter().any(|l| *l <= 0.0) {
        anyhow::bail!("l2 trials need lambda > 0");
    }
    let grid = cfg.grid.build()?;
    let d = grid.d();
    let trials: Vec<L2Trial> = par_trials(cfg.trials, |i| {
        run_trial(cfg, i).unwrap_or_else(|e| L2Trial {
            trial: i,
            trial_seed: derive_seed(cfg.seed, stream::FIELD, i as u64),
            lambda: cfg.lambda[i % cfg.lambda.len()],
            norms: Vec::new(),
            ratio: None,
            multiplier_bound: None,
            oracle_residual: None,
            iterations: 0,
            iterative_vs_oracle: None,
            trivial: false,
            error: Some(e.to_string()),
        })
    });
    let identity = {
        let a = coefficients_for(cfg.coefficients.kind, &cfg.coefficients, &grid, 0)?;
        a.tag() == StructureTag::Constant && is_identity(&a.mean_matrix(), d)
    };

    let mut failures = Vec::new();
    for t in &trials {
        let tag = format!("trial {} (seed {})", t.trial, t.trial_seed);
        if let Some(e) = &t.error {
            failures.push(format!("{tag}: {e}"));
            continue;
        }
        if let (Some(r), Some(c)) = (t.ratio, t.multiplier_bound) {
            if !(r <= c + 1e-8) {
                failures.push(format!("{tag}: ratio {r} exceeds multiplier bound {c}"));
            }
            if identity && !(c <= 3.0) {
                failures.push(format!("{tag}: multiplier bound {c} exceeds 3 for a = I"));
            }
        }
        if let Some(res) = t.oracle_residual {
            if !(res <= 1e-10) {
                failures.push(format!("{tag}: oracle residual {res:e}"));
            }
        }
        if let Some(diff) = t.iterative_vs_oracle {
            if !(diff <= 1e-8) || t.iterations > 3 {
                failures.push(format!(
                    "{tag}: iterative solve differs from oracle by {diff:e} after {} iterations",
                    t.iterations
                ));
            }
        }
    }

    let mut ratios: Vec<f64> = trials.iter().filter_map(|t| t.ratio).collect();
    let max_ratio = ratios.iter().copied().reduce(f64::max);
    let median_ratio = median(&mut ratios);
    let max_multiplier_bound = trials.iter().filter_map(|t| t.multiplier_bound).reduce(f64::max);

    let mut table = Table::new(&[
        "trial", "trial_seed", "lambda", "p", "u_norm", "f_norm", "ratio", "multiplier_bound",
        "oracle_residual", "iterations", "iterative_vs_oracle", "trivial",
    ]);
    for t in &trials {
        for &(p, un, fnorm) in &t.norms {
            table.push(vec![
                t.trial.to_string(),
                t.trial_seed.to_string(),
                num(t.lambda),
                num(p),
                num(un),
                num(fnorm),
                opt((fnorm > 0.0).then(|| un / fnorm)),
                opt(t.multiplier_bound),
                opt(t.oracle_residual),
                t.iterations.to_string(),
                opt(t.iterative_vs_oracle),
                t.trivial.to_string(),
            ]);
        }
    }
    let report = L2Report {
        trials,
        max_ratio,
        median_ratio,
        max_multiplier_bound,
    };
    Ok(Outcome::new(report, table, failures))
}
