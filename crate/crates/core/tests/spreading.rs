use nlspread::spreading::{classify, default_phi, PlanarReduction, Side};
use nlspread::{build_kernel, estimate_cstar, Grid, Kernel, KernelSpec, Model, Profile, SpreadingOptions};

fn setup() -> (Model, Kernel) {
    let g = Grid::line(200.0, 1024).unwrap();
    let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
    (Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap(), k)
}

fn opts() -> SpreadingOptions {
    SpreadingOptions {
        half_width: 15.0,
        coarsen: 2,
        n_max: 120,
        tol_c: 0.1,
        ..SpreadingOptions::default()
    }
}

#[test]
fn one_step_is_monotone_and_stays_in_the_class() {
    let (model, k) = setup();
    let o = opts();
    let red = PlanarReduction::new(&model, &k, [1.0, 0.0], 1.0, 1.0, &o).unwrap();
    let g = *red.profile_grid();
    let n = g.len();
    let phi = default_phi(g.half_extent(0), n, 0.5, 2.0).unwrap();
    let lo = phi.clone();
    let hi = Profile::from_values(g, phi.values().iter().map(|v| (v + 0.2).min(1.0)).collect()).unwrap();
    let (rl, rh) = (red.apply(&lo, &phi, 1.0, 1.0).unwrap(), red.apply(&hi, &phi, 1.0, 1.0).unwrap());
    for i in 0..n {
        assert!(rl.values()[i] <= rh.values()[i] + 1e-12);
        assert!(rl.values()[i] >= phi.values()[i]);
        assert!((0.0..=1.0).contains(&rh.values()[i]));
    }
    assert_eq!(rl.monotonicity_defect(), 0.0);
    assert_eq!(rh.monotonicity_defect(), 0.0);
}

#[test]
fn side_does_not_depend_on_the_seed_profile() {
    let (model, k) = setup();
    let o = opts();
    let red = PlanarReduction::new(&model, &k, [1.0, 0.0], 1.0, 4.0, &o).unwrap();
    let g = *red.profile_grid();
    let seeds = [
        default_phi(g.half_extent(0), g.len(), 0.5, 2.0).unwrap(),
        default_phi(g.half_extent(0), g.len(), 0.25, 5.0).unwrap(),
    ];
    for phi in &seeds {
        assert_eq!(classify(&red, phi, 1.0, 0.5, &o).unwrap().side, Side::Theta);
        assert_eq!(classify(&red, phi, 1.0, 4.0, &o).unwrap().side, Side::Zero);
    }
}

#[test]
fn symmetric_kernel_spreads_symmetrically() {
    let (model, k) = setup();
    let o = opts();
    let right = estimate_cstar(1.0, [1.0, 0.0], &model, &k, (1.0, 3.0), &o).unwrap();
    let left = estimate_cstar(1.0, [-1.0, 0.0], &model, &k, (1.0, 3.0), &o).unwrap();
    assert!((right.c_star - left.c_star).abs() <= o.tol_c, "{} vs {}", right.c_star, left.c_star);
    assert!(right.bracket.1 - right.bracket.0 <= o.tol_c);
    assert!(right.witnesses.0 > right.witnesses.1);
}
