//! Microbenchmarks for the hot kernels: distance evaluation on both routes,
//! the Whitney stream, the transport dual, and a small degenerate solve.

use codimlab_core::alpha::transport::{solve_lipschitz_dual, Workspace};
use codimlab_core::geometry::{make_flat, make_lipschitz_graph, ProfileSpec};
use codimlab_core::numeric::SplitMix64;
use codimlab_core::smooth_distance::{d_exponent, EvalPath, OperatorParams};
use codimlab_core::solver::{assemble_and_solve, Grid};
use codimlab_core::whitney::{visit_whitney, BoxRegion};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_distance(c: &mut Criterion) {
    let flat = make_flat(1, 3, 10.0, 0.01).unwrap();
    let sine =
        make_lipschitz_graph(3, ProfileSpec::Sine { amplitude: 0.1, frequency: 1.0 }, 0.1, 10.0, 0.01)
            .unwrap();
    let x = [0.3, 0.7, 0.2];
    c.bench_function("d_beta flat parametric", |b| {
        b.iter(|| d_exponent(&flat, 1.0, black_box(&x), EvalPath::Parametric).unwrap().value)
    });
    c.bench_function("d_beta sine parametric", |b| {
        b.iter(|| d_exponent(&sine, 1.0, black_box(&x), EvalPath::Parametric).unwrap().value)
    });
    c.bench_function("d_beta flat cloud 2001 atoms", |b| {
        b.iter(|| d_exponent(&flat, 1.0, black_box(&x), EvalPath::Cloud).unwrap().value)
    });
}

fn bench_whitney(c: &mut Criterion) {
    let set = make_flat(1, 3, 10.0, 0.01).unwrap();
    let bx = BoxRegion::cube(&[0.0, 0.0, 0.0], 2.0);
    c.bench_function("whitney stream level 5", |b| {
        b.iter(|| {
            let mut count = 0usize;
            visit_whitney(&set, &bx, 5, 10_000_000, &|_| false, &mut |_, _| count += 1).unwrap();
            count
        })
    });
}

fn bench_transport(c: &mut Criterion) {
    let mut rng = SplitMix64::new(5);
    let m = 200;
    let mut positions = Vec::new();
    let mut mass = Vec::new();
    let mut cap = Vec::new();
    for _ in 0..m {
        positions.extend_from_slice(&[rng.range_f64(-1.0, 1.0), rng.range_f64(-1.0, 1.0)]);
        mass.push(rng.range_f64(-1.0, 1.0));
        cap.push(rng.range_f64(0.2, 1.0));
    }
    c.bench_function("transport dual 200 nodes", |b| {
        b.iter(|| {
            let mut ws = Workspace::default();
            solve_lipschitz_dual(&positions, 2, &mass, &cap, &mut ws).unwrap().value
        })
    });
}

fn bench_solver(c: &mut Criterion) {
    let set = make_flat(1, 3, 10.0, 0.01).unwrap();
    let bx = BoxRegion::cube(&[0.0, 0.0, 0.0], 2.0);
    let params = OperatorParams::new(1.0, 0.0, 1.0, &set).unwrap();
    c.bench_function("degenerate solve 24^3", |b| {
        b.iter(|| {
            let grid = Grid::new(&set, &bx, 24, None).unwrap();
            assemble_and_solve(grid, &set, &params, &|_| 1.0).unwrap().1.iterations
        })
    });
}

criterion_group!(benches, bench_distance, bench_whitney, bench_transport, bench_solver);
criterion_main!(benches);
