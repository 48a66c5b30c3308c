//! Decay of the cutoff commutators `u_k = D½(uη_k) - η_k D½u` in `k`.

use serde::Serialize;

use halfheat::fractional::cutoff_commutator;
use halfheat::oscillation::fit_slope;
use halfheat::{field_from_expression, Field};

use crate::config::ExperimentConfig;
use crate::report::{num, Outcome, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub p: f64,
    pub k: u32,
    pub norm: f64,
    /// `2^{-k/2} Σ_{j≥1} 2^{-j(1/2+1/p)} ‖u‖_{L_p((-2^{k+j}, 2^{k+j}) × Ω)}`.
    pub bound_sum: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailPReport {
    pub p: f64,
    pub slope: Option<f64>,
    /// `max_k ‖u_k‖_p / bound_sum_k`: the constant for which the weighted-sum bound holds.
    pub measured_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    pub per_p: Vec<TailPReport>,
}

/// `‖u‖_p` restricted to `|t| < half_width`.
fn windowed_norm(u: &Field, p: f64, half_width: f64) -> f64 {
    let g = u.grid();
    let s_len = g.spatial_len();
    let sum: f64 = u
        .data()
        .iter()
        .enumerate()
        .filter(|(i, _)| g.time_coord(i / s_len).abs() < half_width)
        .map(|(_, v)| v.abs().powf(p))
        .sum();
    (sum * g.cell_measure()).powf(1.0 / p)
}

/// The weighted sum with every window of half-width `≥ l_t/2` replaced by the
/// whole torus, whose contribution is summed in closed form.
pub fn bound_sum(u: &Field, p: f64, k: u32) -> f64 {
    let alpha = 0.5 + 1.0 / p;
    let half = u.grid().l_t() / 2.0;
    let full = windowed_norm(u, p, f64::INFINITY);
    let mut total = 0.0;
    let mut j = 1;
    loop {
        let w = 2f64.powi((k + j) as i32);
        if w >= half {
            total += full * 2f64.powf(-(j as f64) * alpha) / (1.0 - 2f64.powf(-alpha));
            break;
        }
        total += 2f64.powf(-(j as f64) * alpha) * windowed_norm(u, p, w);
        j += 1;
    }
    2f64.powf(-(k as f64) / 2.0) * total
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let grid = cfg.grid.build()?;
    let spec = &cfg.tail;
    let needed = 2f64.powi(spec.k_max as i32 + 3);
    if grid.l_t() < needed {
        anyhow::bail!("tail decay needs l_t >= 2^(k_max+3) = {needed}, got {}", grid.l_t());
    }
    if spec.k_min > spec.k_max {
        anyhow::bail!("k_min must not exceed k_max");
    }
    let u = field_from_expression(&grid, &spec.expression)?;
    let ks: Vec<u32> = (spec.k_min..=spec.k_max).collect();
    let commutators = ks
        .iter()
        .map(|&k| cutoff_commutator(&u, k))
        .collect::<halfheat::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut per_p = Vec::new();
    let mut failures = Vec::new();
    for &p in &cfg.p {
        let mut logs = Vec::new();
        let mut constant: Option<f64> = None;
        for (&k, uk) in ks.iter().zip(&commutators) {
            let norm = uk.lp_norm(p)?;
            let b = bound_sum(&u, p, k);
            let ratio = (b > 0.0).then(|| norm / b);
            if let Some(r) = ratio {
                constant = Some(constant.map_or(r, |c| c.max(r)));
            }
            if norm > 0.0 {
                logs.push((k as f64, norm.log2()));
            }
            rows.push(TailRow {
                p,
                k,
                norm,
                bound_sum: b,
                ratio,
            });
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
        let slope = fit_slope(&xs, &ys);
        if let Some(s) = slope {
            if !(s <= spec.slope_limit) {
                failures.push(format!("p = {p}: fitted slope {s} exceeds {}", spec.slope_limit));
            }
        }
        if let Some(c) = constant {
            if !c.is_finite() {
                failures.push(format!("p = {p}: measured constant is not finite"));
            }
        }
        per_p.push(TailPReport {
            p,
            slope,
            measured_constant: constant,
        });
    }

    let mut table = Table::new(&["p", "k", "norm", "bound_sum", "ratio"]);
    for r in &rows {
        table.push(vec![
            num(r.p),
            r.k.to_string(),
            num(r.norm),
            num(r.bound_sum),
            crate::report::opt(r.ratio),
        ]);
    }
    Ok(Outcome::new(TailReport { rows, per_p }, table, failures))
}
