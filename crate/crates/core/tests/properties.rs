use nlspread::{
    apply_g, build_kernel, reaction, reduce_kernel, ConvolutionPath, Field, Grid, KernelSpec, Model,
};
use proptest::prelude::*;

const N: usize = 64;

fn line() -> Grid {
    Grid::line(64.0, N).unwrap()
}

fn field(values: Vec<f64>) -> Field {
    Field::from_values(line(), values).unwrap()
}

fn unit_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, N)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_is_linear(u in unit_values(), v in unit_values(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.5), line()).unwrap();
        let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = k.convolve(&field(combo)).unwrap();
        let (cu, cv) = (k.convolve(&field(u)).unwrap(), k.convolve(&field(v)).unwrap());
        for i in 0..N {
            let rhs = a * cu.values()[i] + b * cv.values()[i];
            prop_assert!((lhs.values()[i] - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_is_monotone_and_bounded(u in unit_values(), bump in unit_values()) {
        let k = build_kernel(&KernelSpec::gaussian(1.5, -1.0), line()).unwrap();
        let v: Vec<f64> = u.iter().zip(&bump).map(|(x, y)| x + y).collect();
        let sup = v.iter().cloned().fold(0.0, f64::max);
        let (cu, cv) = (k.convolve(&field(u)).unwrap(), k.convolve(&field(v)).unwrap());
        for i in 0..N {
            prop_assert!(cu.values()[i] <= cv.values()[i] + 1e-14);
            prop_assert!(cv.values()[i].abs() <= k.mass() * sup + 1e-12);
        }
    }

    #[test]
    fn spectral_and_direct_paths_agree(u in unit_values(), sigma in 0.5..2.0f64) {
        let k = build_kernel(&KernelSpec::gaussian(sigma, 0.0), line()).unwrap();
        let f = field(u);
        let a = k.convolve_with(&f, ConvolutionPath::Direct).unwrap();
        let b = k.convolve_with(&f, ConvolutionPath::Spectral).unwrap();
        prop_assert!(a.sup_distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn convolution_commutes_with_translation(u in unit_values(), shift in -20isize..20) {
        let k = build_kernel(&KernelSpec::gaussian(1.0, 2.0), line()).unwrap();
        let f = field(u);
        let a = k.convolve(&f.translate_cells([shift, 0])).unwrap();
        let b = k.convolve(&f).unwrap().translate_cells([shift, 0]);
        prop_assert!(a.sup_distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn gaussian_kernels_are_probability_kernels(sigma in 0.5..2.0f64, mean in -2.0..2.0f64) {
        let g = Grid::line(200.0, 2048).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(sigma, mean), g).unwrap();
        prop_assert!((k.mass() - 1.0).abs() < 1e-12);
        prop_assert!(k.weights().iter().all(|w| *w >= 0.0));
        prop_assert!((k.drift_density()[0] - mean).abs() < 1e-6);
    }

    #[test]
    fn reduction_keeps_mass_and_first_moment(m0 in -1.5..1.5f64, m1 in -1.5..1.5f64, axis in 0usize..4) {
        let g = Grid::plane([40.0, 40.0], [128, 128]).unwrap();
        let spec = KernelSpec::Gaussian { sigma: vec![1.0, 1.0], mean: vec![m0, m1] };
        let k = build_kernel(&spec, g).unwrap();
        let xi = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]][axis];
        let r = reduce_kernel(&k, xi).unwrap();
        let expected = k.drift_density()[0] * xi[0] + k.drift_density()[1] * xi[1];
        prop_assert!((r.mass() - k.mass()).abs() < 1e-12);
        prop_assert!((r.drift_density()[0] - expected).abs() < 1e-12);
        prop_assert!((expected - (m0 * xi[0] + m1 * xi[1])).abs() < 1e-6);
    }

    #[test]
    fn logistic_g_stays_in_range(v in prop::collection::vec(0.0..1.0f64, N)) {
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), line()).unwrap();
        let model = Model::logistic(2.0, 1.0, 1.0, k).unwrap();
        let theta = model.theta();
        let u = field(v.iter().map(|x| x * theta).collect());
        let g = apply_g(&model, &u).unwrap();
        for &x in g.values() {
            prop_assert!((-1e-14..=model.beta() + 1e-12).contains(&x));
        }
        prop_assert!(reaction(&model, &u).unwrap().min() >= -1e-14);
    }
}
