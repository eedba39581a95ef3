use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use robrec::{
    gen_regressors, ground_truth_matrix, inject_noise, lad_lp, normalize_regressors, solve_regression, Dataset,
    GeneratorKind, GeneratorSpec, InnerNorm, LossSpec, NoiseSpec, SolverOpts,
};

// 10% outliers of amplitude 1e6 plus small dense noise.
fn dataset(m: usize, big_n: usize) -> Dataset {
    let x = gen_regressors(&GeneratorSpec::new(GeneratorKind::GaussianStatic, 2, big_n, 3)).unwrap().x;
    let x = normalize_regressors(&x).unwrap();
    let a0 = ground_truth_matrix(m, 2, 3).unwrap();
    let noise = NoiseSpec {
        outlier_fraction: 0.1,
        outlier_amplitude: 1e6,
        dense_bound: 0.01,
        seed: 3,
    };
    inject_noise(&x, &a0, &noise).unwrap().dataset(&x).unwrap()
}

fn bench_lad(c: &mut Criterion) {
    let mut group = c.benchmark_group("lad");
    group.sample_size(10);
    let spec = LossSpec::new(InnerNorm::L1, 0.0).unwrap();
    let opts = SolverOpts {
        check_uniqueness: false,
        ..SolverOpts::default()
    };
    for big_n in [50, 200] {
        let d = dataset(1, big_n);
        group.bench_with_input(BenchmarkId::new("simplex", big_n), &d, |b, d| {
            b.iter(|| lad_lp(black_box(d)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("splitting", big_n), &d, |b, d| {
            b.iter(|| solve_regression(black_box(d), &spec, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_multi_output(c: &mut Criterion) {
    let mut group = c.benchmark_group("sum_of_l2");
    group.sample_size(10);
    let opts = SolverOpts {
        check_uniqueness: false,
        ..SolverOpts::default()
    };
    for m in [2, 4] {
        let d = dataset(m, 200);
        group.bench_with_input(BenchmarkId::from_parameter(m), &d, |b, d| {
            b.iter(|| solve_regression(black_box(d), &LossSpec::sum_of_l2(), &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_lad, bench_multi_output);
criterion_main!(benches);
