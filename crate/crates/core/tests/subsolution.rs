use std::f64::consts::PI;

use nlspread::subsolution::{cone_second_moment, f_tilde, SearchOptions};
use nlspread::{
    alpha0, build_kernel, check_lower_bound_form, evolve, gaussian_subsolution, verify_linear_subsolution,
    verify_nonlinear_subsolution, Error, EvolveOptions, Field, Grid, Kernel, KernelSpec, Model,
    SubsolutionParams,
};

fn setup(extent: f64, cells: usize) -> (Model, Kernel) {
    let g = Grid::line(extent, cells).unwrap();
    let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
    (Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap(), k)
}

#[test]
fn cone_moment_matches_closed_forms() {
    let line = Grid::line(10.0, 1000).unwrap();
    assert!((cone_second_moment(&line, 0.5) - 0.5f64.powi(3) / 3.0).abs() < 1e-12);
    // sector of opening 2 pi / 3: int r^2 r dr dphi = (2 pi / 3) rho^4 / 4
    let plane = Grid::plane([8.0, 8.0], [400, 400]).unwrap();
    let exact = PI / 6.0;
    assert!((cone_second_moment(&plane, 1.0) - exact).abs() / exact < 1e-2);
}

#[test]
fn alpha0_is_linear_in_kappa() {
    let g = Grid::line(40.0, 800).unwrap();
    let k = build_kernel(&KernelSpec::UniformBall { radius: 1.0 }, g).unwrap();
    let rho = k.nondeg_radius();
    assert!(rho > 0.0);
    let a1 = alpha0(&k, 1.0).unwrap();
    assert!((alpha0(&k, 2.0).unwrap() - 2.0 * a1).abs() < 1e-15);
    assert!((a1 - 0.5 * rho * cone_second_moment(&g, rho)).abs() < 1e-15);
}

#[test]
fn gaussian_subsolution_shape() {
    let (model, k) = setup(100.0, 512);
    let p = SubsolutionParams::for_model(&model, &k, 0.25, 1.0).unwrap();
    let w = gaussian_subsolution(&p, 10.0, k.grid());
    assert!((w.max() - 0.25).abs() < 1e-3);
    let narrow = SubsolutionParams { alpha: 0.5, ..p.clone() };
    let wn = gaussian_subsolution(&narrow, 10.0, k.grid());
    assert!(wn.values().iter().zip(w.values()).all(|(a, b)| a <= b));
}

#[test]
fn residual_is_linear_in_q_and_increasing_in_m() {
    let (model, k) = setup(100.0, 512);
    let p = SubsolutionParams::for_model(&model, &k, 0.2, 0.004).unwrap();
    let doubled = SubsolutionParams { q: 0.4, ..p.clone() };
    let a = f_tilde(&p, 8.0, &k, 2.0, 1.0).unwrap();
    let b = f_tilde(&doubled, 8.0, &k, 2.0, 1.0).unwrap();
    let c = f_tilde(&p, 8.0, &k, 2.0, 1.5).unwrap();
    for i in 0..a.values().len() {
        assert!((b.values()[i] - 2.0 * a.values()[i]).abs() < 1e-14);
        assert!(c.values()[i] >= a.values()[i]);
    }
}

#[test]
fn q0_and_its_cap() {
    let (model, k) = setup(100.0, 512);
    let p = SubsolutionParams::for_model(&model, &k, 1.0, 0.001).unwrap();
    assert!((p.q0 - 0.5).abs() < 1e-12);
    let err = verify_nonlinear_subsolution(&p, &model, &k, &SearchOptions::default()).unwrap_err();
    assert!(matches!(err, Error::QTooLarge { .. }));
}

#[test]
fn oversized_alpha_fails_the_search() {
    let (model, k) = setup(400.0, 2048);
    let a0 = alpha0(&k, model.kappa()).unwrap();
    let p = SubsolutionParams::for_model(&model, &k, 0.25, 4.0 * a0).unwrap();
    let opts = SearchOptions {
        t_cap: 64.0,
        ..SearchOptions::default()
    };
    let err = verify_linear_subsolution(&p, &k, model.kappa(), model.m() + 0.5 * model.beta(), &opts).unwrap_err();
    assert!(matches!(err, Error::NotASubsolution { .. }), "{err:?}");
}

#[test]
fn lower_bound_form() {
    let (model, k) = setup(100.0, 512);
    let g = *k.grid();
    let flat = evolve(&Field::constant(g, 1.0), 1.0, &model, &k, &EvolveOptions::default()).unwrap();
    let x0 = g.cell_center(g.len() / 2);
    let lb = check_lower_bound_form(&flat, x0, 1.0, 0.0, 1e-300).unwrap();
    assert!((lb.q1 - 1.0).abs() < 1e-12);

    let bump = Field::from_fn(g, |p| if p[0].abs() <= 1.0 { 0.2 } else { 0.0 });
    let traj = evolve(&bump, 5.0, &model, &k, &EvolveOptions::default()).unwrap();
    let lb = check_lower_bound_form(&traj, [0.0, 0.0], 10.0, 5.0, 1e-300).unwrap();
    assert!(lb.positive());

    let zero = evolve(&Field::zeros(g), 1.0, &model, &k, &EvolveOptions::default()).unwrap();
    assert!(matches!(
        check_lower_bound_form(&zero, [0.0, 0.0], 10.0, 1.0, 1e-300),
        Err(Error::PreconditionFail(_))
    ));
}
