use halfheat::coefficients::{generate_coefficients, CoefficientKind};
use halfheat::cylinder::Cylinder;
use halfheat::expr::noise_field;
use halfheat::operator::{gradient_plus, Coefficients, DataBundle};
use halfheat::oscillation::{
    dyadic_cylinder_comparison, fit_slope, manufactured_local_problem, mean_oscillation_vec,
    verify_local_estimate, verify_mean_oscillation, OscillationCase,
};
use halfheat::solver::solve_oracle;
use halfheat::{Field, Grid};

fn local_n_emp(grid: Grid, lambda: f64, width: f64, rho: f64, radius: f64) -> f64 {
    let a = Coefficients::identity(&grid);
    let (u, data) = manufactured_local_problem(&a, lambda, width, rho).unwrap();
    let rep = verify_local_estimate(&a, lambda, &data, &u, radius, 1e-10).unwrap();
    assert!(!rep.trivially_consistent);
    rep.n_emp.unwrap()
}

#[test]
fn local_estimate_is_stable_under_time_refinement() {
    let coarse = Grid::new(1, 256, &[128], 16.0, &[4.0]).unwrap();
    let fine = Grid::new(1, 512, &[128], 16.0, &[4.0]).unwrap();
    let n1 = local_n_emp(coarse, 1.0, 0.5, 0.8, 1.0);
    let n2 = local_n_emp(fine, 1.0, 0.5, 0.8, 1.0);
    assert!(n1.is_finite() && n1 > 0.0);
    assert!((n2 / n1 - 1.0).abs() <= 0.2, "{n1} vs {n2}");
}

#[test]
fn local_estimate_is_invariant_under_parabolic_rescaling() {
    let g = Grid::new(1, 256, &[128], 16.0, &[4.0]).unwrap();
    let n1 = local_n_emp(g, 1.0, 0.5, 0.8, 1.0);
    let n2 = local_n_emp(g.stretched(4.0, 2.0).unwrap(), 0.25, 2.0, 1.6, 2.0);
    assert!((n2 / n1 - 1.0).abs() <= 0.05, "{n1} vs {n2}");
}

#[test]
fn local_estimate_zero_data() {
    let g = Grid::new(1, 64, &[64], 8.0, &[4.0]).unwrap();
    let a = Coefficients::identity(&g);
    let rep = verify_local_estimate(&a, 1.0, &DataBundle::zeros(&g, 1.0), &Field::zeros(&g), 1.0, 1e-10).unwrap();
    assert!(rep.trivially_consistent && rep.n_emp.is_none());
}

#[test]
fn local_estimate_refuses_unsolved_pairs() {
    let g = Grid::new(1, 64, &[64], 8.0, &[4.0]).unwrap();
    let a = Coefficients::identity(&g);
    let (u, data) = manufactured_local_problem(&a, 1.0, 0.5, 0.8).unwrap();
    let wrong = u.scale(1.5);
    assert!(verify_local_estimate(&a, 1.0, &data, &wrong, 1.0, 1e-10).is_err());
}

#[test]
fn caloric_gradient_oscillation_is_linear_in_r() {
    // u = c t + c x²/2 solves u_t = u_xx; D⁺u = c(x + h/2).
    let g = Grid::new(1, 64, &[1024], 4.0, &[4.0]).unwrap();
    let c = 1.5;
    let u = Field::from_fn(&g, |p| c * p.t + c * p.x[0] * p.x[0] / 2.0).unwrap();
    let grad = gradient_plus(&u);
    let radii = [0.1, 0.2, 0.4, 0.8];
    let osc: Vec<f64> = radii
        .iter()
        .map(|&r| mean_oscillation_vec(&grad.component_refs(), &Cylinder::parabolic(0.0, &[0.0], r)).unwrap())
        .collect();
    for (r, o) in radii.iter().zip(&osc) {
        assert!((o - c * r / 2.0).abs() <= 2.0 * c * g.h(0), "r={r} osc={o}");
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = osc.iter().map(|o| o.ln()).collect();
    assert!((fit_slope(&lx, &ly).unwrap() - 1.0).abs() < 0.05);
}

fn far_source(grid: &Grid, inner: f64) -> Field {
    Field::from_fn(grid, |p| {
        let r = p.x[0].abs();
        let s = ((r - inner) / 0.4).clamp(0.0, 1.0);
        (1.0 + 0.5 * (std::f64::consts::TAU * p.t / grid.l_t()).cos()) * s * s * (3.0 - 2.0 * s)
    })
    .unwrap()
}

#[test]
fn heat_oscillation_decay() {
    let g = Grid::new(1, 256, &[256], 4.0, &[4.0]).unwrap();
    let a = Coefficients::identity(&g);
    let f = far_source(&g, 1.25);
    let data = DataBundle::new(Field::zeros(&g), halfheat::VectorField::zeros(&g), f, 1.0).unwrap();
    let u = solve_oracle(&a, 1.0, &data).unwrap().bundle.u;
    let rep = verify_mean_oscillation(OscillationCase::UHeat, &a, 1.0, &data, &u, &[4.0, 8.0, 16.0], 1.0, (0.0, &[0.0]), 1e-10).unwrap();
    assert!(rep.rows.iter().all(|r| r.data_term == 0.0));
    assert!(rep.fitted_slope.unwrap() <= -0.9, "{:?}", rep);
}

#[test]
fn zero_solution_has_zero_oscillation() {
    let g = Grid::new(1, 64, &[64], 4.0, &[4.0]).unwrap();
    let a = Coefficients::identity(&g);
    let data = DataBundle::zeros(&g, 1.0);
    let rep = verify_mean_oscillation(OscillationCase::CalUTimeCoeffs, &a, 1.0, &data, &Field::zeros(&g), &[4.0, 8.0], 1.0, (0.0, &[0.0]), 1e-10).unwrap();
    assert!(rep.rows.iter().all(|r| r.oscillation == 0.0 && r.empirical_constant.is_none()));
    assert!(rep.fitted_slope.is_none());
}

#[test]
fn dyadic_cells_compare_with_cylinders() {
    let g = Grid::new(2, 64, &[16, 16], 2.0, &[2.0, 2.0]).unwrap();
    let f = noise_field(&g, 9, 0.6);
    let cmp = dyadic_cylinder_comparison(&f, 1).unwrap();
    assert!(cmp.holds && cmp.max_ratio <= cmp.bound, "{cmp:?}");
    let g1 = Grid::new(1, 64, &[64], 2.0, &[2.0]).unwrap();
    let a = generate_coefficients(CoefficientKind::Checkerboard { epsilon: 0.4 }, 0.5, 1, &g1, 0.25).unwrap();
    let cmp = dyadic_cylinder_comparison(a.entry(0, 0), 2).unwrap();
    assert!(cmp.holds);
}
