use std::f64::consts::PI;

use nlspread::{build_kernel, truncate_kernel, Field, Grid, KernelSpec};

#[test]
fn truncated_cauchy_keeps_the_central_mass() {
    let g = Grid::line(400.0, 8192).unwrap();
    let k = build_kernel(&KernelSpec::Cauchy { scale: 1.0 }, g).unwrap();
    let (t, drift) = truncate_kernel(&k, 10.0).unwrap();
    // the kernel is renormalized on the grid, so compare fractions of it
    let fraction = t.mass() / k.mass();
    let exact = (2.0 / PI) * 10f64.atan() / ((2.0 / PI) * 200f64.atan());
    assert!((fraction - exact).abs() < 1e-3, "{fraction} vs {exact}");
    assert!(drift[0].abs() < 1e-12);
    assert!(t.spread() < k.spread());
}

#[test]
fn uniform_disc_mass_is_exact_in_the_plane() {
    let g = Grid::plane([20.0, 20.0], [256, 256]).unwrap();
    let k = build_kernel(&KernelSpec::UniformBall { radius: 1.0 }, g).unwrap();
    assert!((k.mass() - 1.0).abs() < 1e-12);
    assert!(k.drift_density()[0].abs() < 1e-12 && k.drift_density()[1].abs() < 1e-12);
    let v = k.convolve(&Field::constant(g, 0.7)).unwrap();
    assert!(v.values().iter().all(|x| (x - 0.7).abs() < 1e-12));
}
