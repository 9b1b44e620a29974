use nlspread::evolution::{
    check_comparison, check_continuous_dependence, check_directional_monotonicity, check_equivariance,
    check_positivity, check_tube,
};
use nlspread::nonlinearity::Verdict;
use nlspread::{
    build_kernel, constant_data_oracle, evolve, linear_upper_bound, Competition, EvolveOptions, Field, Grid,
    Kernel, KernelSpec, Model, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(cells: usize, extent: f64) -> (Model, Kernel) {
    let g = Grid::line(extent, cells).unwrap();
    let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
    (Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap(), k)
}

fn logistic_closed_form(beta: f64, theta: f64, r0: f64, t: f64) -> f64 {
    theta * r0 / (r0 + (theta - r0) * (-beta * t).exp())
}

#[test]
fn constant_data_follow_the_logistic_ode() {
    let (model, k) = setup(128, 64.0);
    let t = 3f64.ln();
    let traj = evolve(&Field::constant(*k.grid(), 0.5), t, &model, &k, &EvolveOptions::default()).unwrap();
    let exact = logistic_closed_form(1.0, 1.0, 0.5, t);
    assert!((exact - 0.75).abs() < 1e-15);
    for &v in traj.last().values() {
        assert!(((v - exact) / exact).abs() <= 1e-6, "{v}");
    }
}

#[test]
fn constant_data_oracle_matches_power_nonlinearity() {
    let g = Grid::line(64.0, 128).unwrap();
    let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
    let comp = Competition::general_power(1.0, 1.0, 2, k.clone());
    let model = Model::with_declared_theta(2.0, 1.0, comp, 1.0).unwrap();
    let traj = evolve(&Field::constant(g, 0.3), 2.0, &model, &k, &EvolveOptions::default()).unwrap();
    let oracle = constant_data_oracle(&model, 0.3, 2.0).unwrap();
    assert!((traj.last().values()[17] - oracle).abs() < 1e-6);
    // G(s) = 1 - (1 - s)^2, so du/dt = u (1 - u)^2: implicit solution
    let implicit = |u: f64| (u / (1.0 - u)).ln() + 1.0 / (1.0 - u);
    assert!((implicit(oracle) - implicit(0.3) - 2.0).abs() < 1e-8);
}

#[test]
fn random_ordered_pairs_stay_ordered_in_the_tube() {
    let (model, k) = setup(256, 128.0);
    let g = *k.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = EvolveOptions::default();
    for _ in 0..4 {
        let lo: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() * 0.6).collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + rng.random::<f64>() * (1.0 - v)).collect();
        let a = evolve(&Field::from_values(g, lo).unwrap(), 4.0, &model, &k, &opts).unwrap();
        let b = evolve(&Field::from_values(g, hi).unwrap(), 4.0, &model, &k, &opts).unwrap();
        assert!(check_comparison(&a, &b, 1e-8).unwrap().holds);
        assert!(check_tube(&a, 1.0, 1e-8).holds);
        assert!(check_tube(&b, 1.0, 1e-8).holds);
    }
}

#[test]
fn semigroup_property() {
    let (model, k) = setup(256, 128.0);
    let u0 = Field::from_fn(*k.grid(), |p| if p[0].abs() < 3.0 { 0.4 } else { 0.0 });
    let opts = EvolveOptions::default();
    let whole = evolve(&u0, 3.0, &model, &k, &opts).unwrap();
    let first = evolve(&u0, 1.0, &model, &k, &opts).unwrap();
    let rest = evolve(&first.last().clone().with_time(0.0), 2.0, &model, &k, &opts).unwrap();
    assert!(whole.last().sup_distance(rest.last()).unwrap() < 1e-9);
}

#[test]
fn compact_bump_becomes_positive() {
    let (model, k) = setup(512, 128.0);
    let u0 = Field::from_fn(*k.grid(), |p| if p[0].abs() <= 1.0 { 0.2 } else { 0.0 });
    let traj = evolve(&u0, 2.0, &model, &k, &EvolveOptions::default()).unwrap();
    let rep = check_positivity(&traj, 1.0, &Window::centered(10.0));
    assert_eq!(rep.verdict, Verdict::Holds);
    assert!(rep.min_value > 0.0);
}

#[test]
fn linear_problem_bounds_the_solution() {
    let (model, k) = setup(256, 128.0);
    let u0 = Field::from_fn(*k.grid(), |p| 0.5 * (-p[0] * p[0] / 8.0).exp());
    let traj = evolve(&u0, 2.0, &model, &k, &EvolveOptions::default()).unwrap();
    let bound = linear_upper_bound(&u0, 2.0, model.kappa(), model.m(), &k).unwrap();
    for (u, b) in traj.last().values().iter().zip(bound.values()) {
        assert!(*u <= b + 1e-10);
    }
}

#[test]
fn translation_equivariance_in_one_and_two_dimensions() {
    let (model, k) = setup(256, 128.0);
    let u0 = Field::from_fn(*k.grid(), |p| 0.3 * (-(p[0] - 2.0).powi(2)).exp());
    let rep = check_equivariance(&u0, [17, 0], 3.0, &model, &k, &EvolveOptions::default()).unwrap();
    assert!(rep.holds, "{}", rep.sup_difference);

    let g = Grid::plane([32.0, 32.0], [64, 64]).unwrap();
    let spec = KernelSpec::Gaussian {
        sigma: vec![1.0],
        mean: vec![0.5, 0.0],
    };
    let k = build_kernel(&spec, g).unwrap();
    let model = Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap();
    let u0 = Field::from_fn(g, |p| if p[0].abs() < 2.0 && p[1].abs() < 3.0 { 0.4 } else { 0.0 });
    let rep = check_equivariance(&u0, [3, -5], 1.0, &model, &k, &EvolveOptions::default()).unwrap();
    assert!(rep.holds, "{}", rep.sup_difference);
}

#[test]
fn monotone_fronts_stay_monotone() {
    let (model, k) = setup(512, 256.0);
    let u0 = Field::from_fn(*k.grid(), |p| 0.5 * (1.0 - (p[0] / 3.0).tanh()));
    let traj = evolve(&u0, 5.0, &model, &k, &EvolveOptions::default()).unwrap();
    let rep = check_directional_monotonicity(&traj, [1, 0], &Window::centered(60.0), 1e-10);
    assert!(rep.holds, "{:?}", rep.worst);

    let flat = evolve(&Field::constant(*k.grid(), 0.3), 2.0, &model, &k, &EvolveOptions::default()).unwrap();
    let rep = check_directional_monotonicity(&flat, [1, 0], &Window::centered(60.0), 1e-10);
    assert!(rep.holds);
}

#[test]
fn solutions_depend_continuously_on_data() {
    let (model, k) = setup(256, 128.0);
    let g = *k.grid();
    let u0 = Field::from_fn(g, |p| if p[0].abs() < 4.0 { 0.3 } else { 0.0 });
    let pert = Field::from_fn(g, |p| (-(p[0] + 1.0).powi(2) / 4.0).exp());
    let rep = check_continuous_dependence(
        &u0,
        &pert,
        &[1e-2, 1e-3, 1e-4],
        3.0,
        &Window::centered(20.0),
        &model,
        &k,
        &EvolveOptions::default(),
    )
    .unwrap();
    assert!(rep.holds, "{:?}", rep);
    assert!(rep.rows.windows(2).all(|w| w[1].max_difference < w[0].max_difference));
}
