use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nlspread::{build_kernel, ConvolutionPath, Field, Grid, KernelSpec};

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolve");
    for cells in [512usize, 2048, 8192] {
        let g = Grid::line(cells as f64 / 20.0, cells).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
        let u = Field::from_fn(g, |p| (-p[0] * p[0]).exp());
        group.bench_with_input(BenchmarkId::new("spectral", cells), &cells, |b, _| {
            b.iter(|| k.convolve_with(black_box(&u), ConvolutionPath::Spectral).unwrap())
        });
        // quadratic in the cell count, so only the small sizes
        if cells <= 2048 {
            group.bench_with_input(BenchmarkId::new("direct", cells), &cells, |b, _| {
                b.iter(|| k.convolve_with(black_box(&u), ConvolutionPath::Direct).unwrap())
            });
        }
    }
    group.finish();

    let g = Grid::plane([64.0, 64.0], [256, 256]).unwrap();
    let k = build_kernel(&KernelSpec::gaussian(1.0, 0.0), g).unwrap();
    let u = Field::from_fn(g, |p| (-(p[0] * p[0] + p[1] * p[1])).exp());
    c.bench_function("convolve/spectral_2d_256", |b| b.iter(|| k.convolve(black_box(&u)).unwrap()));
}

criterion_group!(benches, convolution);
criterion_main!(benches);
