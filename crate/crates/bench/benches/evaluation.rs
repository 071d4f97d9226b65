use std::hint::black_box;

use cayley_qmc::analysis::{marker_observable, ordered_solution, phase_diagram_scan, projector_observable, Projector};
use cayley_qmc::model::{transfer_coeffs_numeric, vertex_operator};
use cayley_qmc::state::{eval_bruteforce, eval_bruteforce_reduced, eval_recursive};
use cayley_qmc::{Branch, EvalContext, ModelParams};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn context() -> EvalContext {
    let p = ModelParams::new(1.0, 0.5, 0.8).unwrap();
    EvalContext::new(p, &ordered_solution(&p, Branch::OrderedPlus).unwrap()).unwrap()
}

fn operators(c: &mut Criterion) {
    let p = ModelParams::new(1.0, 0.5, 0.8).unwrap();
    c.bench_function("vertex_operator", |b| b.iter(|| vertex_operator(black_box(&p)).unwrap()));
    c.bench_function("transfer_coeffs_numeric", |b| b.iter(|| transfer_coeffs_numeric(black_box(&p)).unwrap()));
}

fn evaluation(c: &mut Criterion) {
    let ctx = context();
    let mut g = c.benchmark_group("marker");
    for n in [4usize, 16, 64] {
        let a = marker_observable(n);
        g.bench_with_input(BenchmarkId::new("recursive", n), &a, |b, a| b.iter(|| eval_recursive(&ctx, a)));
    }
    g.finish();

    let mut g = c.benchmark_group("projector");
    for n in 1usize..=2 {
        let a = projector_observable(n, Projector::P);
        g.bench_with_input(BenchmarkId::new("recursive", n), &a, |b, a| b.iter(|| eval_recursive(&ctx, a)));
    }
    let p1 = projector_observable(1, Projector::P);
    g.bench_function("bruteforce/1", |b| b.iter(|| eval_bruteforce(&ctx, &p1, 1).unwrap()));
    let p2 = projector_observable(2, Projector::P);
    g.bench_function("reduced/2", |b| b.iter(|| eval_bruteforce_reduced(&ctx, &p2, 2).unwrap()));
    g.finish();
}

fn scans(c: &mut Criterion) {
    let mut g = c.benchmark_group("phase_diagram");
    g.sample_size(10);
    g.bench_function("50x50", |b| b.iter(|| phase_diagram_scan((-2.0, 2.0), (0.0, 2.0), 1.0, black_box(50)).unwrap()));
    g.finish();
}

criterion_group!(benches, operators, evaluation, scans);
criterion_main!(benches);
