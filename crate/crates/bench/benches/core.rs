use cjsr_bench::example1;
use cjsr_core::{
    alg1_generate, alg2_generate, gripenberg_bounds, kron, max_feasible_gamma, solve_dual, veronese_lift, Mat,
    MonomialBasis,
};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn linalg(c: &mut Criterion) {
    let a = Mat::from_fn(8, 8, |i, j| ((i * 8 + j) as f64).sin());
    let b = Mat::from_fn(8, 8, |i, j| ((i + 3 * j) as f64).cos());
    c.bench_function("kron 8x8", |bench| bench.iter(|| kron(black_box(&a), black_box(&b))));
    let basis = MonomialBasis::new(8, 2).unwrap();
    c.bench_function("veronese 8x8 degree 2", |bench| {
        bench.iter(|| veronese_lift(black_box(&a), &basis).unwrap())
    });
}

fn bounds(c: &mut Criterion) {
    let lifted = example1();
    let mut g = c.benchmark_group("bounds");
    g.sample_size(10);
    g.bench_function("gripenberg eps=0.01 t=12", |bench| {
        bench.iter(|| gripenberg_bounds(lifted.phis(), 0.01, 12).unwrap())
    });
    g.finish();
}

fn generation(c: &mut Criterion) {
    let lifted = example1();
    let mut g = c.benchmark_group("generation");
    g.sample_size(10);
    g.bench_function("dual solve 2d=2", |bench| bench.iter(|| solve_dual(&lifted, 1, 1.1).unwrap()));
    let cert = max_feasible_gamma(&lifted, 1, 1e-4).unwrap().certificate;
    g.bench_function("alg1 h=3 k=72", |bench| {
        bench.iter(|| alg1_generate(&lifted, &cert, 3, 72, black_box(7)).unwrap())
    });
    g.bench_function("alg2 eps=0.01 t=12", |bench| bench.iter(|| alg2_generate(&lifted, 0.01, 12).unwrap()));
    g.finish();
}

criterion_group!(benches, linalg, bounds, generation);
criterion_main!(benches);
