//! Identity suite: every invariant of the time calculus and of the variational
//! solver, evaluated on seeded random fields, plus quadrature cross-validation.

use serde::Serialize;

use halfheat::coefficients::CoefficientKind;
use halfheat::expr::{field_from_expression, noise_field};
use halfheat::fractional::{
    half_derivative, half_derivative_quadrature, hilbert, project_mean_nyquist_free,
    project_nyquist_free, time_derivative,
};
use halfheat::operator::{
    apply_operator, apply_rhs, forward_difference, gradient_plus, symmetric_eigenvalues,
    Coefficients, DataBundle, SolutionBundle,
};
use halfheat::solver::{bilinear_b_kappa, solve};
use halfheat::{Field, Grid, VectorField};

use super::{coefficients_for, data_for, par_trials, rel_dev, stream};
use crate::config::{derive_seed, ExperimentConfig};
use crate::report::{num, Outcome, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum Check {
    HilbertInvolution,
    HilbertIsometry,
    HilbertContraction,
    HilbertSkewness,
    AdjointIdentity,
    SecondHalfDerivative,
    SpatialCommutation,
    HalfDerivativeSymmetry,
    DualitySkewness,
    SummationByParts,
    PointwiseEllipticity,
    Coercivity,
    Boundedness,
    ReductionIdentity,
}

pub const CHECKS: [Check; 14] = [
    Check::HilbertInvolution,
    Check::HilbertIsometry,
    Check::HilbertContraction,
    Check::HilbertSkewness,
    Check::AdjointIdentity,
    Check::SecondHalfDerivative,
    Check::SpatialCommutation,
    Check::HalfDerivativeSymmetry,
    Check::DualitySkewness,
    Check::SummationByParts,
    Check::PointwiseEllipticity,
    Check::Coercivity,
    Check::Boundedness,
    Check::ReductionIdentity,
];

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Self::HilbertInvolution => "hilbert_involution",
            Self::HilbertIsometry => "hilbert_isometry",
            Self::HilbertContraction => "hilbert_contraction",
            Self::HilbertSkewness => "hilbert_skewness",
            Self::AdjointIdentity => "adjoint_identity",
            Self::SecondHalfDerivative => "second_half_derivative",
            Self::SpatialCommutation => "spatial_commutation",
            Self::HalfDerivativeSymmetry => "half_derivative_symmetry",
            Self::DualitySkewness => "duality_skewness",
            Self::SummationByParts => "summation_by_parts",
            Self::PointwiseEllipticity => "pointwise_ellipticity",
            Self::Coercivity => "coercivity",
            Self::Boundedness => "boundedness",
            Self::ReductionIdentity => "reduction_identity",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Self::AdjointIdentity | Self::SecondHalfDerivative | Self::Coercivity => 1e-10,
            Self::SummationByParts | Self::ReductionIdentity => 1e-11,
            _ => 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub tolerance: f64,
    pub worst: f64,
    pub worst_seed: u64,
    pub evaluations: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureRow {
    pub signal: String,
    pub truncation: usize,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<CheckResult>,
    pub quadrature: Vec<QuadratureRow>,
    pub quadrature_passed: bool,
    /// Measured `max ‖D½u‖_p / (‖u_t‖_p + ‖u‖_p)` per p.
    pub norm_inequality_constants: Vec<(f64, f64)>,
}

fn l2(f: &Field) -> f64 {
    f.l2_norm()
}

/// The time-calculus deviations of one pair of fields.
pub fn calculus_deviations(u: &Field, phi: &Field) -> Vec<(Check, f64)> {
    let mut out = Vec::new();
    let p = project_mean_nyquist_free(u);
    let hp = hilbert(&p);
    out.push((Check::HilbertInvolution, rel_dev(l2(&(&hilbert(&hp) + &p)), l2(&p))));
    out.push((Check::HilbertIsometry, rel_dev(l2(&hp) - l2(&p), l2(&p))));
    out.push((Check::HilbertContraction, rel_dev((l2(&hilbert(u)) - l2(u)).max(0.0), l2(u))));
    let hu = hilbert(u);
    let hphi = hilbert(phi);
    out.push((
        Check::HilbertSkewness,
        rel_dev(hu.inner(phi).unwrap() + u.inner(&hphi).unwrap(), l2(u) * l2(phi)),
    ));
    let un = project_nyquist_free(u);
    let dun = half_derivative(&un);
    let dphi = half_derivative(phi);
    let lhs = hilbert(&dun).inner(&dphi).unwrap();
    let phit = time_derivative(phi);
    let rhs = un.inner(&phit).unwrap();
    out.push((Check::AdjointIdentity, rel_dev(lhs - rhs, l2(&dun) * l2(&dphi) + l2(&un) * l2(&phit))));
    let du = half_derivative(u);
    let ht = hilbert(&time_derivative(u));
    out.push((Check::SecondHalfDerivative, rel_dev(l2(&(&half_derivative(&du) - &ht)), l2(&ht))));
    let comm = (0..u.grid().d())
        .map(|a| {
            let c1 = half_derivative(&forward_difference(u, a));
            let c2 = forward_difference(&du, a);
            rel_dev((&c1 - &c2).max_abs(), c2.max_abs())
        })
        .fold(0.0, f64::max);
    out.push((Check::SpatialCommutation, comm));
    let s1 = u.inner(&dphi).unwrap();
    let s2 = du.inner(phi).unwrap();
    out.push((Check::HalfDerivativeSymmetry, rel_dev(s1 - s2, l2(u) * l2(&dphi) + l2(&du) * l2(phi))));
    let a = hilbert(&dphi).inner(&du).unwrap();
    let b = hilbert(&du).inner(&dphi).unwrap();
    out.push((Check::DualitySkewness, rel_dev(a + b, 2.0 * l2(&du) * l2(&dphi))));
    out
}

fn u_norm_sq(u: &Field, lambda: f64) -> f64 {
    let b = SolutionBundle::from_u(u.clone(), lambda);
    l2(&b.half_du).powi(2) + b.grad.l2_norm().powi(2) + lambda * l2(u).powi(2)
}

/// Summation by parts and pointwise ellipticity for one coefficient field.
pub fn operator_deviations(a: &Coefficients, u: &Field, phi: &Field) -> Vec<(Check, f64)> {
    let lhs = apply_operator(a, 0.0, u).unwrap().inner(phi).unwrap();
    let t = time_derivative(u).inner(phi).unwrap();
    let flux = a.apply(&gradient_plus(u)).unwrap();
    let s = flux.inner(&gradient_plus(phi)).unwrap();
    let scale = l2(&time_derivative(u)) * l2(phi) + flux.l2_norm() * gradient_plus(phi).l2_norm();
    let sbp = rel_dev(lhs - t - s, scale);
    let d = a.d();
    let delta = a.delta();
    let worst = (0..a.grid().len())
        .map(|idx| {
            let m = a.matrix_at(idx);
            let sym: Vec<f64> = (0..d * d).map(|k| 0.5 * (m[k] + m[(k % d) * d + k / d])).collect();
            let min = symmetric_eigenvalues(d, &sym).into_iter().fold(f64::INFINITY, f64::min);
            (delta - min).max(0.0) / delta
        })
        .fold(0.0, f64::max);
    vec![(Check::SummationByParts, sbp), (Check::PointwiseEllipticity, worst)]
}

/// Coercivity and boundedness of `B_κ` with `κ = δ²/2`.
pub fn form_deviations(a: &Coefficients, lambda: f64, u: &Field, v: &Field) -> Vec<(Check, f64)> {
    let delta = a.delta();
    let kappa = delta * delta / 2.0;
    let nu = u_norm_sq(u, lambda);
    let b_uu = bilinear_b_kappa(a, lambda, kappa, u, u).unwrap();
    let coercive = rel_dev((kappa * nu - b_uu).max(0.0), nu);
    let bound = (1.0 + kappa) * (1.0 + 1.0 / delta) * (nu * u_norm_sq(v, lambda)).sqrt();
    let b_uv = bilinear_b_kappa(a, lambda, kappa, u, v).unwrap();
    let bounded = rel_dev((b_uv.abs() - bound).max(0.0), bound);
    vec![(Check::Coercivity, coercive), (Check::Boundedness, bounded)]
}

/// `P_I u = rhs(h, g + (a - I)D⁺u, f)` for a solved pair `P_a u = rhs(h, g, f)`.
pub fn reduction_deviation(a: &Coefficients, data: &DataBundle, u: &Field) -> f64 {
    let grid = a.grid();
    let d = a.d();
    let du = gradient_plus(u);
    let g_tilde: Vec<Field> = (0..d)
        .map(|i| {
            let mut acc = data.g.component(i).clone();
            for j in 0..d {
                let shift = if i == j { 1.0 } else { 0.0 };
                let c = a.entry(i, j).map(|v| v - shift);
                acc = &acc + &c.mul(du.component(j)).unwrap();
            }
            acc
        })
        .collect();
    let reduced = DataBundle::new(data.h.clone(), VectorField::new(g_tilde).unwrap(), data.f.clone(), data.lambda).unwrap();
    let lhs = apply_operator(&Coefficients::identity(grid), data.lambda, u).unwrap();
    let rhs = apply_rhs(&reduced).unwrap();
    rel_dev(l2(&(&lhs - &rhs)), l2(&rhs))
}

/// Relative error of the folded-kernel quadrature against the spectral half derivative.
pub fn quadrature_errors(n_t: usize, signal: &str, truncations: &[usize]) -> anyhow::Result<Vec<f64>> {
    let grid = Grid::new(1, n_t, &[8], std::f64::consts::TAU, &[1.0])?;
    let u = field_from_expression(&grid, signal)?;
    let spectral = half_derivative(&u);
    truncations
        .iter()
        .map(|&t| {
            let q = half_derivative_quadrature(&u, t)?;
            Ok(rel_dev(l2(&(&q - &spectral)), l2(&spectral)))
        })
        .collect()
}

/// Clamp a checkerboard amplitude to what `delta` admits.
fn admissible(kind: CoefficientKind, delta: f64) -> CoefficientKind {
    match kind {
        CoefficientKind::Checkerboard { epsilon } => CoefficientKind::Checkerboard {
            epsilon: epsilon.min(halfheat::coefficients::max_checkerboard_epsilon(delta)),
        },
        k => k,
    }
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let grid = cfg.grid.build()?;
    let spec = &cfg.identities;
    let lambda_at = |i: usize| cfg.lambda[i % cfg.lambda.len()];
    let kind_at = |i: usize| spec.kinds[i % spec.kinds.len()];
    if spec.kinds.is_empty() || cfg.lambda.is_empty() {
        anyhow::bail!("identities needs at least one coefficient kind and one lambda");
    }

    let mut worst: Vec<(f64, u64, usize)> = vec![(0.0, cfg.seed, 0); CHECKS.len()];
    let mut record = |seed: u64, devs: Vec<(Check, f64)>| {
        for (c, v) in devs {
            let w = &mut worst[c as usize];
            w.2 += 1;
            // NaN counts as the worst possible deviation.
            if v.is_nan() || v > w.0 {
                w.0 = if v.is_nan() { f64::INFINITY } else { v };
                w.1 = seed;
            }
        }
    };

    let trial_devs = par_trials(cfg.trials, |i| -> anyhow::Result<(u64, Vec<(Check, f64)>)> {
        let seed = derive_seed(cfg.seed, stream::FIELD, i as u64);
        let u = noise_field(&grid, seed, 1.0);
        let phi = noise_field(&grid, derive_seed(seed, stream::FIELD, 1), 1.0);
        let mut devs = calculus_deviations(&u, &phi);
        let coeff_seed = derive_seed(seed, stream::COEFFS, 0);
        let delta = cfg.coefficients.delta;
        let a = coefficients_for(admissible(kind_at(i), delta), &cfg.coefficients, &grid, coeff_seed)?;
        devs.extend(operator_deviations(&a, &u, &phi));
        let lambda = lambda_at(i).max(f64::MIN_POSITIVE);
        let data = data_for(&grid, &cfg.data, derive_seed(seed, stream::DATA, 0), lambda)?;
        let solved = solve(&a, lambda, &data, &cfg.solver)?;
        devs.push((Check::ReductionIdentity, reduction_deviation(&a, &data, &solved.bundle.u)));
        Ok((seed, devs))
    });
    for r in trial_devs {
        let (seed, devs) = r?;
        record(seed, devs);
    }

    let n_forms = spec.coercivity_fields * spec.deltas.len();
    let form_devs = par_trials(n_forms, |i| -> anyhow::Result<(u64, Vec<(Check, f64)>)> {
        let delta = spec.deltas[i / spec.coercivity_fields];
        let seed = derive_seed(cfg.seed, stream::COEFFS, 1000 + i as u64);
        let mut cspec = cfg.coefficients.clone();
        cspec.delta = delta;
        let a = coefficients_for(admissible(kind_at(i), delta), &cspec, &grid, seed)?;
        let u = project_nyquist_free(&noise_field(&grid, derive_seed(seed, stream::FIELD, 0), 1.0));
        let v = project_nyquist_free(&noise_field(&grid, derive_seed(seed, stream::FIELD, 1), 1.0));
        let mut devs = form_deviations(&a, lambda_at(i).max(f64::MIN_POSITIVE), &u, &v);
        devs.extend(operator_deviations(&a, &u, &v).into_iter().filter(|(c, _)| *c == Check::PointwiseEllipticity));
        Ok((seed, devs))
    });
    for r in form_devs {
        let (seed, devs) = r?;
        record(seed, devs);
    }

    let mut failures = Vec::new();
    let checks: Vec<CheckResult> = CHECKS
        .iter()
        .map(|&c| {
            let (w, seed, n) = worst[c as usize];
            let passed = w <= c.tolerance();
            if !passed {
                failures.push(format!(
                    "{}: worst deviation {w:e} exceeds {:e} (seed {seed})",
                    c.name(),
                    c.tolerance()
                ));
            }
            CheckResult {
                name: c.name(),
                tolerance: c.tolerance(),
                worst: w,
                worst_seed: seed,
                evaluations: n,
                passed,
            }
        })
        .collect();

    let mut quadrature = Vec::new();
    let mut quadrature_passed = true;
    for signal in &spec.quadrature_signals {
        let errs = quadrature_errors(spec.quadrature_n_t, signal, &spec.quadrature_truncations)?;
        for (k, (&t, &e)) in spec.quadrature_truncations.iter().zip(&errs).enumerate() {
            let ok = if k == 0 { e <= 1e-3 } else { e <= 1.1 * errs[k - 1] };
            if !ok {
                quadrature_passed = false;
                failures.push(format!("quadrature: {signal} at truncation {t}: error {e:e}"));
            }
            quadrature.push(QuadratureRow {
                signal: signal.clone(),
                truncation: t,
                relative_error: e,
            });
        }
    }

    let smooth = field_from_expression(&grid, "sin(t) * cos(2*pi*x1) + 0.5*cos(3*t)")?;
    let norm_inequality_constants = cfg
        .p
        .iter()
        .map(|&p| {
            let num = half_derivative(&smooth).lp_norm(p)?;
            let den = time_derivative(&smooth).lp_norm(p)? + smooth.lp_norm(p)?;
            Ok((p, num / den))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut table = Table::new(&["check", "tolerance", "worst_deviation", "worst_seed", "evaluations", "passed"]);
    for c in &checks {
        table.push(vec![
            c.name.into(),
            num(c.tolerance),
            num(c.worst),
            c.worst_seed.to_string(),
            c.evaluations.to_string(),
            c.passed.to_string(),
        ]);
    }
    for q in &quadrature {
        table.push(vec![
            format!("quadrature[{}]@{}", q.signal.replace(',', ";"), q.truncation),
            String::new(),
            num(q.relative_error),
            String::new(),
            "1".into(),
            String::new(),
        ]);
    }
    let report = IdentityReport {
        checks,
        quadrature,
        quadrature_passed,
        norm_inequality_constants,
    };
    Ok(Outcome::new(report, table, failures))
}
