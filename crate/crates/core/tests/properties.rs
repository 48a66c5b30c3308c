use approx::assert_relative_eq;
use proptest::prelude::*;

use halfheat::coefficients::{check_assumption_time, check_assumption_x1, generate_coefficients, CoefficientKind};
use halfheat::cylinder::Cylinder;
use halfheat::expr::noise_field;
use halfheat::fractional::{
    half_derivative, hilbert, project_mean_nyquist_free, project_nyquist_free, time_derivative,
};
use halfheat::operator::{
    apply_operator, apply_rhs, forward_difference, gradient_plus, Coefficients, DataBundle,
    SolutionBundle,
};
use halfheat::oscillation::{
    dyadic_sharp, mean_oscillation, parabolic_maximal, strong_maximal, tail_sum, theta_field,
};
use halfheat::solver::bilinear_b_kappa;
use halfheat::{inverse_transform_time, transform_time, Field, Grid, VectorField};

fn grid_1d() -> Grid {
    Grid::new(1, 32, &[16], 2.0, &[1.0]).unwrap()
}

fn grid_2d() -> Grid {
    Grid::new(2, 16, &[8, 8], 1.0, &[1.0, 1.0]).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn u_norm_sq(u: &Field, lambda: f64) -> f64 {
    let b = SolutionBundle::from_u(u.clone(), lambda);
    b.half_du.l2_norm().powi(2) + b.grad.l2_norm().powi(2) + lambda * u.l2_norm().powi(2)
}

fn kinds() -> impl Strategy<Value = CoefficientKind> {
    prop_oneof![
        Just(CoefficientKind::Constant),
        (1usize..4).prop_map(|n| CoefficientKind::TimePiecewise { n_jumps: n }),
        (1usize..4).prop_map(|n| CoefficientKind::X1Piecewise { n_jumps: n }),
        Just(CoefficientKind::Smooth),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_and_round_trip(seed in 0u64..10_000, band in 0.2f64..1.0) {
        let g = grid_2d();
        let u = noise_field(&g, seed, band);
        let s = transform_time(&u);
        let back = inverse_transform_time(&s);
        prop_assert!((&back - &u).l2_norm() <= 1e-13 * u.l2_norm());
        prop_assert!(rel(s.parseval_energy(), u.l2_norm().powi(2)) <= 1e-12);
    }

    #[test]
    fn lp_norm_below_sup_bound(seed in 0u64..10_000, p in 1.0f64..8.0) {
        let g = grid_1d();
        let u = noise_field(&g, seed, 0.8);
        prop_assert!(u.lp_norm(p).unwrap() <= u.max_abs() * g.volume().powf(1.0 / p) * (1.0 + 1e-12));
    }

    #[test]
    fn hilbert_is_an_isometric_skew_involution(seed in 0u64..10_000) {
        let g = grid_1d();
        let u = noise_field(&g, seed, 1.0);
        let v = noise_field(&g, seed + 1, 1.0);
        let p = project_mean_nyquist_free(&u);
        prop_assert!((&hilbert(&hilbert(&p)) + &p).l2_norm() <= 1e-12 * p.l2_norm());
        prop_assert!(rel(hilbert(&p).l2_norm(), p.l2_norm()) <= 1e-12);
        prop_assert!(hilbert(&u).l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
        let lhs = hilbert(&u).inner(&v).unwrap();
        let rhs = -u.inner(&hilbert(&v)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * u.l2_norm() * v.l2_norm());
    }

    #[test]
    fn half_derivative_identities(seed in 0u64..10_000) {
        let g = grid_2d();
        let u = project_nyquist_free(&noise_field(&g, seed, 0.9));
        let phi = noise_field(&g, seed + 7, 0.9);
        let scale = half_derivative(&u).l2_norm() * half_derivative(&phi).l2_norm() + 1.0;
        let a = hilbert(&half_derivative(&u)).inner(&half_derivative(&phi)).unwrap();
        let b = u.inner(&time_derivative(&phi)).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * scale);
        let dd = half_derivative(&half_derivative(&u));
        let ht = hilbert(&time_derivative(&u));
        prop_assert!((&dd - &ht).l2_norm() <= 1e-10 * ht.l2_norm().max(1.0));
        let s1 = u.inner(&half_derivative(&phi)).unwrap();
        let s2 = half_derivative(&u).inner(&phi).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-12 * scale);
        for axis in 0..g.d() {
            let c1 = half_derivative(&forward_difference(&u, axis));
            let c2 = forward_difference(&half_derivative(&u), axis);
            prop_assert!((&c1 - &c2).max_abs() <= 1e-12 * c1.max_abs().max(1.0));
        }
    }

    #[test]
    fn duality_skewness(seed in 0u64..10_000) {
        let g = grid_1d();
        let u = noise_field(&g, seed, 1.0);
        let w = noise_field(&g, seed + 3, 1.0);
        let a = hilbert(&half_derivative(&w)).inner(&half_derivative(&u)).unwrap();
        let b = -hilbert(&half_derivative(&u)).inner(&half_derivative(&w)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * half_derivative(&u).l2_norm() * half_derivative(&w).l2_norm());
    }

    #[test]
    fn summation_by_parts(seed in 0u64..10_000, kind in kinds()) {
        let g = grid_2d();
        let a = generate_coefficients(kind, 0.5, seed, &g, 0.25).unwrap();
        let u = noise_field(&g, seed, 1.0);
        let phi = noise_field(&g, seed + 11, 1.0);
        let lhs = apply_operator(&a, 0.0, &u).unwrap().inner(&phi).unwrap();
        let rhs = time_derivative(&u).inner(&phi).unwrap()
            + a.apply(&gradient_plus(&u)).unwrap().inner(&gradient_plus(&phi)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (lhs.abs() + rhs.abs() + 1.0));
    }

    #[test]
    fn generated_coefficients_are_coercive(seed in 0u64..10_000, kind in kinds(), delta in prop::sample::select(vec![0.25, 0.5, 1.0])) {
        let g = grid_2d();
        let a = generate_coefficients(kind, delta, seed, &g, 0.25).unwrap();
        for idx in (0..g.len()).step_by(37) {
            let m = a.matrix_at(idx);
            for w in [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8], [0.3, 0.7]] {
                let q: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| m[i * 2 + j] * w[i] * w[j]).sum();
                let n2 = w[0] * w[0] + w[1] * w[1];
                prop_assert!(q >= delta * n2 - 1e-12);
            }
        }
    }

    #[test]
    fn gamma_invariant_under_constant_shift(seed in 0u64..10_000, c in -0.4f64..0.4) {
        let g = Grid::new(1, 32, &[32], 4.0, &[4.0]).unwrap();
        let a = generate_coefficients(CoefficientKind::Checkerboard { epsilon: 0.3 }, 0.5, seed, &g, 0.5).unwrap();
        let shifted = a.shifted_unchecked(&[c]);
        let t1 = check_assumption_time(&a, 0.5).unwrap().gamma_estimate;
        let t2 = check_assumption_time(&shifted, 0.5).unwrap().gamma_estimate;
        prop_assert!((t1 - t2).abs() <= 1e-12);
        let x1 = check_assumption_x1(&a, 0.5).unwrap().gamma_estimate;
        let x2 = check_assumption_x1(&shifted, 0.5).unwrap().gamma_estimate;
        prop_assert!((x1 - x2).abs() <= 1e-12);
    }

    #[test]
    fn coercivity_and_boundedness(seed in 0u64..10_000, kind in kinds(), delta in prop::sample::select(vec![0.25, 0.5, 1.0]), lambda in 0.1f64..10.0) {
        let g = grid_2d();
        let a = generate_coefficients(kind, delta, seed, &g, 0.25).unwrap();
        let kappa = delta * delta / 2.0;
        let u = project_nyquist_free(&noise_field(&g, seed, 1.0));
        let v = project_nyquist_free(&noise_field(&g, seed + 5, 1.0));
        let b_uu = bilinear_b_kappa(&a, lambda, kappa, &u, &u).unwrap();
        let nu = u_norm_sq(&u, lambda);
        prop_assert!(b_uu >= kappa * nu - 1e-10 * nu);
        let b_uv = bilinear_b_kappa(&a, lambda, kappa, &u, &v).unwrap();
        let bound = (1.0 + kappa) * (1.0 + 1.0 / delta) * nu.sqrt() * u_norm_sq(&v, lambda).sqrt();
        prop_assert!(b_uv.abs() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn reduction_identity(seed in 0u64..10_000, kind in kinds(), lambda in 0.5f64..8.0) {
        let g = grid_2d();
        let a = generate_coefficients(kind, 0.5, seed, &g, 0.25).unwrap();
        let u = noise_field(&g, seed, 1.0);
        // Data for which u is an exact solution: random h, g = -a D⁺u, f absorbs the rest.
        let h = noise_field(&g, seed + 1, 1.0);
        let pa = apply_operator(&a, lambda, &u).unwrap();
        let flux = a.apply(&gradient_plus(&u)).unwrap();
        let gi: Vec<Field> = flux.components().iter().map(|c| c.scale(-1.0)).collect();
        let partial = DataBundle::new(h.clone(), VectorField::new(gi.clone()).unwrap(), Field::zeros(&g), lambda).unwrap();
        let f_full = &pa - &apply_rhs(&partial).unwrap();
        let data = DataBundle::new(h.clone(), VectorField::new(gi.clone()).unwrap(), f_full.clone(), lambda).unwrap();
        let b = apply_rhs(&data).unwrap();
        prop_assert!((&pa - &b).l2_norm() <= 1e-11 * b.l2_norm());
        let du = gradient_plus(&u);
        let d = g.d();
        let g_tilde: Vec<Field> = (0..d).map(|i| {
            let mut acc = gi[i].clone();
            for j in 0..d {
                let delta_ij = if i == j { 1.0 } else { 0.0 };
                let coef = a.entry(i, j).map(|v| v - delta_ij);
                acc = &acc + &coef.mul(du.component(j)).unwrap();
            }
            acc
        }).collect();
        let lhs = apply_operator(&Coefficients::identity(&g), lambda, &u).unwrap();
        let rhs = apply_rhs(&DataBundle::new(h, VectorField::new(g_tilde).unwrap(), f_full, lambda).unwrap()).unwrap();
        prop_assert!((&lhs - &rhs).l2_norm() <= 1e-11 * rhs.l2_norm());
    }

    #[test]
    fn oscillation_against_best_constant(seed in 0u64..10_000, r in 0.2f64..0.45) {
        let g = Grid::new(1, 32, &[32], 2.0, &[1.0]).unwrap();
        let f = noise_field(&g, seed, 0.7);
        let q = Cylinder::parabolic(0.0, &[0.0], r);
        let osc = mean_oscillation(&f, &q).unwrap();
        let idx = q.indices(&g);
        let best = (-300..=300)
            .map(|k| k as f64 * 0.01)
            .map(|c| idx.iter().map(|&i| (f.data()[i] - c).abs()).sum::<f64>() / idx.len() as f64)
            .fold(f64::INFINITY, f64::min);
        prop_assert!(osc <= 2.0 * best + 1e-12);
    }

    #[test]
    fn sharp_function_ignores_constants(seed in 0u64..10_000, c in -5.0f64..5.0) {
        let g = Grid::new(1, 64, &[64], 2.0, &[2.0]).unwrap();
        let f = noise_field(&g, seed, 0.5);
        let s1 = dyadic_sharp(&f, 0..=2).unwrap();
        let s2 = dyadic_sharp(&f.map(|v| v + c), 0..=2).unwrap();
        prop_assert!((&s1 - &s2).max_abs() <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn tail_sum_monotone(seed in 0u64..10_000, j in 1usize..6) {
        let g = Grid::new(1, 128, &[16], 64.0, &[4.0]).unwrap();
        let f = noise_field(&g, seed, 0.5).map(f64::abs);
        let a = tail_sum(&f, 0.5, 1.0, (0.0, &[0.0]), j).unwrap();
        let b = tail_sum(&f, 0.5, 1.0, (0.0, &[0.0]), j + 1).unwrap();
        prop_assert!(b.value >= a.value);
        let bigger = f.map(|v| v + 0.1);
        let c = tail_sum(&bigger, 0.5, 1.0, (0.0, &[0.0]), j).unwrap();
        prop_assert!(c.value >= a.value);
    }

    #[test]
    fn theta_is_linear(seed in 0u64..10_000, s in -3.0f64..3.0) {
        let g = grid_2d();
        let a = generate_coefficients(CoefficientKind::Smooth, 0.5, seed, &g, 0.25).unwrap();
        let u = noise_field(&g, seed, 1.0);
        let v = noise_field(&g, seed + 9, 1.0);
        let lhs = theta_field(&a, &u.axpy(s, &v).unwrap()).unwrap();
        let rhs = theta_field(&a, &u).unwrap().axpy(s, &theta_field(&a, &v).unwrap()).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * (1.0 + rhs.max_abs()));
        let b = generate_coefficients(CoefficientKind::Constant, 0.5, seed + 1, &g, 0.25).unwrap();
        let sum = a.shifted_unchecked(&b.mean_matrix());
        let lhs = theta_field(&sum, &u).unwrap();
        let rhs = &theta_field(&a, &u).unwrap() + &theta_field(&b, &u).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * (1.0 + rhs.max_abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn maximal_functions_are_sublinear(seed in 0u64..10_000) {
        let g = Grid::new(1, 32, &[32], 4.0, &[2.0]).unwrap();
        let f = noise_field(&g, seed, 0.6);
        let h = noise_field(&g, seed + 1, 0.6);
        let fh = &f + &h;
        for m in [parabolic_maximal, strong_maximal] {
            let lhs = m(&fh);
            let rhs = &m(&f) + &m(&h);
            for (x, y) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!(*x <= y + 1e-12);
            }
        }
    }
}

#[test]
fn htpf_file_round_trip() {
    let g = grid_2d();
    let u = noise_field(&g, 42, 0.7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.htpf");
    halfheat::htpf::save(&path, &u).unwrap();
    let back = halfheat::htpf::load(&path).unwrap();
    assert_eq!(back, u);
    std::fs::write(&path, b"not a field").unwrap();
    assert!(halfheat::htpf::load(&path).is_err());
}

#[test]
fn multiplier_bound_tracks_identity_limit() {
    let g = grid_1d();
    let a = Coefficients::identity(&g);
    let c = halfheat::solver::multiplier_bound(&a, 1.0).unwrap();
    assert!(c >= 1.0 && c <= 2f64.sqrt() + 1e-12);
    assert_relative_eq!(
        halfheat::solver::multiplier_bound(&a, 1e6).unwrap(),
        1.0,
        epsilon = 1e-3
    );
}
