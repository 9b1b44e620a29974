use nlspread::diagnostics::{fit_line, iterate_recurrence};
use nlspread::{
    build_kernel, check_avg_jump_lemma, check_recurrence_divergence, evolve, hair_trigger_metric,
    level_set_position, Error, EvolveOptions, Field, Grid, KernelSpec, Model, Profile,
};

#[test]
fn synthetic_front_moves_at_unit_speed() {
    let g = Grid::line(100.0, 1000).unwrap();
    let points: Vec<(f64, f64)> = (0..=20)
        .map(|k| {
            let t = k as f64;
            let f = Field::from_fn(g, |x| 0.5 * (1.0 - (x[0] + 10.0 - t).tanh()));
            (t, level_set_position(&f, 0.5, [1.0, 0.0]).unwrap())
        })
        .collect();
    let fit = fit_line(&points).unwrap();
    assert!((fit.speed - 1.0).abs() < 1e-3, "{}", fit.speed);
    assert!((fit.intercept + 10.0).abs() < 1e-2);
}

#[test]
fn jump_lemma_for_a_step_profile() {
    let g = Grid::line(200.0, 4000).unwrap();
    let v = Profile::from_fn(60.0, 1200, |s| if s < 0.0 { 1.0 } else { 0.0 }).unwrap();
    for (mean, expected) in [(1.0, 1.0), (-0.5, -0.5), (0.0, 0.0)] {
        let b = build_kernel(&KernelSpec::gaussian(1.0, mean), g).unwrap();
        let rep = check_avg_jump_lemma(&b, &v, &[10.0, 20.0, 40.0]).unwrap();
        let last = rep.rows.last().unwrap().1;
        assert!((last - expected).abs() < 1e-3, "mean {mean}: {last}");
    }
}

#[test]
fn recurrence_terms_match_a_direct_loop() {
    let rep = iterate_recurrence(1.0, 1.0, 1.0, 2.0, 1_000_000).unwrap();
    let (mut r, mut sum, mut n) = (1.0f64, 0.0, 0usize);
    while sum < 2.0 {
        n += 1;
        sum += 1.0 / (r * r.exp());
        r += (-r).exp();
    }
    assert_eq!(rep.n, Some(n));
    assert!(rep.increasing);
    let two = iterate_recurrence(1.0, 1.0, 1.0, f64::INFINITY, 2).unwrap();
    assert!((two.r_last - (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    assert!(matches!(
        check_recurrence_divergence(1.0, 1.0, 1.0, 5.0, 10_000),
        Err(Error::IterationCap { cap: 10_000 })
    ));
}

#[test]
fn hair_trigger_metric_rises_and_guards_the_seam() {
    let g = Grid::line(200.0, 2048).unwrap();
    let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
    let model = Model::logistic(2.0, 1.0, 1.0, k.clone()).unwrap();
    let u0 = Field::from_fn(g, |p| if p[0].abs() <= 1.0 { 0.2 } else { 0.0 });
    let traj = evolve(&u0, 20.0, &model, &k, &EvolveOptions::default()).unwrap();
    let series = hair_trigger_metric(&traj, 5.0, [0.0, 0.0]).unwrap();
    assert!(series.first_reaching(0.99).is_some());
    assert!(series.largest_drop_after(10.0) < 1e-8);
    assert!(matches!(
        hair_trigger_metric(&traj, 5.0, [5.0, 0.0]),
        Err(Error::SeamViolation { .. })
    ));
}
