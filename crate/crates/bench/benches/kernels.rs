use std::hint::black_box;

use arrhenius_rd::dsolve::{arrhenius_oracle_u, build_diffusivity};
use arrhenius_rd::scenario::{assemble, preset};
use arrhenius_rd::specfun::{airy_pair, bessel_j0, exp_integral_ei};
use arrhenius_rd::verify::pde_residual_with_order;
use criterion::{criterion_group, criterion_main, Criterion};

fn specfun(c: &mut Criterion) {
    let xs: Vec<f64> = (1..=200).map(|i| 0.1 * i as f64).collect();
    c.bench_function("exp_integral_ei x200", |b| {
        b.iter(|| xs.iter().map(|&x| exp_integral_ei(black_box(x)).unwrap()).sum::<f64>())
    });
    c.bench_function("bessel_j0 x200", |b| b.iter(|| xs.iter().map(|&x| bessel_j0(black_box(x))).sum::<f64>()));
    c.bench_function("airy_pair x200", |b| {
        b.iter(|| xs.iter().map(|&x| airy_pair(black_box(x - 10.0)).unwrap().ai).sum::<f64>())
    });
}

fn diffusivity(c: &mut Criterion) {
    let mut g = c.benchmark_group("diffusivity");
    g.sample_size(20);
    g.bench_function("build R0=1 theta<=20", |b| b.iter(|| build_diffusivity(black_box(1.0), 20.0, 1e-12).unwrap()));
    let grid: Vec<f64> = (1..=100).map(|i| 0.2 * i as f64).collect();
    g.bench_function("ode oracle 100 points", |b| b.iter(|| arrhenius_oracle_u(black_box(1.0), &grid).unwrap()));
    g.finish();
}

fn residual(c: &mut Criterion) {
    let sol = assemble(&preset(3).unwrap()).unwrap();
    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    g.bench_function("pde_residual preset 3 400x64", |b| {
        b.iter(|| pde_residual_with_order(black_box(&sol), 400, 64).unwrap())
    });
    g.finish();
}

criterion_group!(benches, specfun, diffusivity, residual);
criterion_main!(benches);
