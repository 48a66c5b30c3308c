//! Both small-oscillation checkers on every configured coefficient kind.

use serde::Serialize;

use halfheat::coefficients::{check_assumption_time, check_assumption_x1, AssumptionReport, CoefficientKind};

use super::lp_sweep::kind_label;
use super::{coefficients_for, par_trials, stream};
use crate::config::{derive_seed, ExperimentConfig};
use crate::report::{num, Outcome, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KindAssumptions {
    pub kind: CoefficientKind,
    pub seed: u64,
    pub time: AssumptionReport,
    pub x1: AssumptionReport,
}

/// Expected outcome: `None` means report only.
/// The spatial checkerboard also oscillates in `x'` when `d ≥ 2`.
fn expectations(kind: CoefficientKind, d: usize) -> (Option<(f64, f64)>, Option<(f64, f64)>) {
    let zero = Some((0.0, 1e-12));
    match kind {
        CoefficientKind::Constant => (zero, zero),
        CoefficientKind::TimePiecewise { .. } => (zero, None),
        CoefficientKind::X1Piecewise { .. } => (None, zero),
        CoefficientKind::Checkerboard { epsilon } => {
            let range = Some((epsilon / 4.0, 2.0 * epsilon));
            (range, if d >= 2 { range } else { None })
        }
        CoefficientKind::Smooth => (None, None),
    }
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let grid = cfg.grid.build()?;
    let r0 = cfg.assumptions.r0;
    let kinds = &cfg.assumptions.kinds;
    let results = par_trials(kinds.len(), |i| -> anyhow::Result<KindAssumptions> {
        let seed = derive_seed(cfg.seed, stream::COEFFS, i as u64);
        let a = coefficients_for(kinds[i], &cfg.coefficients, &grid, seed)?;
        Ok(KindAssumptions {
            kind: kinds[i],
            seed,
            time: check_assumption_time(&a, r0)?,
            x1: check_assumption_x1(&a, r0)?,
        })
    });
    let reports = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;

    let mut failures = Vec::new();
    let mut table = Table::new(&["kind", "coefficient_seed", "checker", "gamma_estimate", "expected_low", "expected_high", "passed"]);
    for r in &reports {
        let (et, ex) = expectations(r.kind, grid.d());
        for (name, rep, exp) in [("time", &r.time, et), ("x1", &r.x1, ex)] {
            let g = rep.gamma_estimate;
            let passed = exp.is_none_or(|(lo, hi)| g >= lo && g <= hi);
            if !passed {
                let (lo, hi) = exp.expect("checked above");
                failures.push(format!("{} / {name}: gamma {g} outside [{lo}, {hi}]", kind_label(r.kind)));
            }
            table.push(vec![
                kind_label(r.kind),
                r.seed.to_string(),
                name.into(),
                num(g),
                exp.map(|e| num(e.0)).unwrap_or_default(),
                exp.map(|e| num(e.1)).unwrap_or_default(),
                passed.to_string(),
            ]);
        }
    }
    Ok(Outcome::new(reports, table, failures))
}
