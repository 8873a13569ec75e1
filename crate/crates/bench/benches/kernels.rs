//! Benchmarks of the hot kernels: Hankel evaluation, system assembly, LU
//! factorization, and the small-scale contour eigensolver.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use num_complex::Complex64;

use resonex_bench::two_row_grid;
use resonex_core::linalg::LuFactors;
use resonex_core::nep::{self, ContourSpec, SSParams};
use resonex_core::{bie, specfun};

fn bench_specfun(c: &mut Criterion) {
    let mut group = c.benchmark_group("specfun");
    let series = Complex64::new(4.1, -0.9);
    let asymptotic = Complex64::new(38.0, -3.5);
    group.bench_function("bessel_j1h1_series", |b| {
        b.iter(|| specfun::bessel_j1h1(std::hint::black_box(series)).unwrap())
    });
    group.bench_function("bessel_j1h1_asymptotic", |b| {
        b.iter(|| specfun::bessel_j1h1(std::hint::black_box(asymptotic)).unwrap())
    });
    group.finish();
}

fn bench_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    group.sample_size(10);
    let k = Complex64::new(4.66, -0.39);
    for cols in [4usize, 8] {
        let grid = two_row_grid(cols, 24);
        group.bench_function(format!("grid_{cols}x2_n24"), |b| {
            b.iter(|| bie::assemble(std::hint::black_box(k), &grid).unwrap())
        });
    }
    let grid = two_row_grid(8, 24);
    group.bench_function("derivative_8x2_n24", |b| {
        b.iter(|| bie::assemble_derivative_analytic(std::hint::black_box(k), &grid).unwrap())
    });
    group.finish();
}

fn bench_lu(c: &mut Criterion) {
    let mut group = c.benchmark_group("lu");
    group.sample_size(10);
    let k = Complex64::new(4.66, -0.39);
    let grid = two_row_grid(8, 24);
    let a = bie::assemble(k, &grid).unwrap();
    group.bench_function("factorize_768", |b| {
        b.iter_batched(
            || a.clone(),
            |a| LuFactors::new(&a).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn bench_contour_solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("nep");
    group.sample_size(10);
    let grid = two_row_grid(2, 12);
    let contour = ContourSpec::new(Complex64::new(4.0, -0.6), 0.5, 16).unwrap();
    let params = SSParams {
        refine: false,
        residual_tol: 1e-2,
        ..SSParams::default()
    };
    group.bench_function("spectrum_2x2_n12", |b| {
        b.iter(|| nep::resonances(&grid, &contour, &params).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_specfun,
    bench_assembly,
    bench_lu,
    bench_contour_solver
);
criterion_main!(benches);
