use anipar_core::funcspace::luxemburg_norm;
use anipar_core::solver::{build_basis, initial_coeffs, GalerkinSystem, Problem, SolverConfig};
use anipar_core::{Derivative, FieldExpr, GridFunction, RectDomain, SineBasis};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn anisotropic(m: usize) -> (Problem, SolverConfig) {
    let prob = Problem::new(
        RectDomain::unit(2),
        vec![FieldExpr::parse("2 + 0.2*sin(3*x1)").unwrap(), FieldExpr::constant(1.9)],
        FieldExpr::parse("x1*(1-x1)*x2*(1-x2)").unwrap(),
        FieldExpr::parse("sin(pi*x1)*sin(pi*x2) + 0.3*sin(2*pi*x1)*sin(3*pi*x2)").unwrap(),
        0.5,
        1e-2,
    )
    .unwrap();
    (prob, SolverConfig::new(vec![m, m]))
}

fn rhs(c: &mut Criterion) {
    let mut g = c.benchmark_group("rhs");
    for m in [8, 16, 32] {
        let (prob, cfg) = anisotropic(m);
        let basis = build_basis(&prob, &cfg).unwrap();
        let c0 = initial_coeffs(&prob, &basis).unwrap();
        let sys = GalerkinSystem::new(&prob, basis).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| sys.rhs(black_box(&c0), 0.1).unwrap())
        });
    }
    g.finish();
}

fn eval_expansion(c: &mut Criterion) {
    let mut g = c.benchmark_group("eval_expansion");
    for m in [16, 64] {
        let basis = SineBasis::with_default_grid(&RectDomain::unit(2), &[m, m]).unwrap();
        let mut coeffs = basis.zeros();
        for (i, v) in coeffs.data_mut().iter_mut().enumerate() {
            *v = 1.0 / (1.0 + i as f64);
        }
        g.bench_with_input(BenchmarkId::new("dx1", m), &m, |b, _| {
            b.iter(|| basis.eval_expansion(black_box(&coeffs), Derivative::First(0)))
        });
    }
    g.finish();
}

fn luxemburg(c: &mut Criterion) {
    let basis = SineBasis::with_default_grid(&RectDomain::unit(2), &[32, 32]).unwrap();
    let grid = basis.grid().clone();
    let u = GridFunction::from_fn(grid.clone(), |x| (7.0 * x[0]).sin() * x[1] * (1.0 - x[1]) * 5.0);
    let p = GridFunction::from_fn(grid, |x| 1.5 + x[0] * x[1]);
    c.bench_function("luxemburg_norm", |b| {
        b.iter(|| luxemburg_norm(black_box(&u), black_box(&p), 1e-10).unwrap())
    });
}

fn parse(c: &mut Criterion) {
    let text = "2 + 0.2*sin(3*x1)*exp(-t) + abs(x2 - 0.5)^1.5 / (1 + x1^2)";
    c.bench_function("parse", |b| b.iter(|| FieldExpr::parse(black_box(text)).unwrap()));
}

criterion_group!(benches, rhs, eval_expansion, luxemburg, parse);
criterion_main!(benches);
