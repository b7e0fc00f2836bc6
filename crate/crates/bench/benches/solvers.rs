use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use kirchhoff_core::domain_potential::{build_grid, evaluate_potential, DomainSpec, PotentialSpec};
use kirchhoff_core::energy::{KirchhoffParams, Problem};
use kirchhoff_core::minimizer::{
    continuation_sweep, geometric_sequence, init_trial, normalized_gradient_flow, FlowConfig, SweepOptions,
};
use kirchhoff_core::{solve_ground_state, RadialProfile, ShootingConfig};

fn harmonic(nodes: usize, a: f64, q: &RadialProfile) -> Problem {
    let grid = Arc::new(build_grid(&DomainSpec::interval(-1.0, 1.0, nodes, 12)).unwrap());
    let v = evaluate_potential(&PotentialSpec::single(vec![0.0], 2.0), &grid).unwrap();
    Problem::new(grid, v, KirchhoffParams::critical(a, 1.0, q)).unwrap()
}

fn profiles(c: &mut Criterion) {
    let mut g = c.benchmark_group("ground_state");
    for n in 1..=3 {
        g.bench_function(format!("N={n}"), |b| {
            b.iter(|| solve_ground_state(black_box(n), &ShootingConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn flow(c: &mut Criterion) {
    let q = solve_ground_state(1, &ShootingConfig::default()).unwrap();
    let mut g = c.benchmark_group("flow");
    g.sample_size(20);
    for nodes in [1024, 4096] {
        let problem = harmonic(nodes, 1e-4, &q);
        let init = init_trial(&q, 8.0, &[0.05], &problem.grid).unwrap().state;
        g.bench_function(format!("a=1e-4/{nodes} nodes"), |b| {
            b.iter(|| normalized_gradient_flow(&problem, black_box(&init), &FlowConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let q = solve_ground_state(1, &ShootingConfig::default()).unwrap();
    let problem = harmonic(4096, 1e-2, &q);
    let init = init_trial(&q, 2.5, &[0.0], &problem.grid).unwrap().state;
    let values = geometric_sequence(1e-2, 1e-6, 12);
    let options = SweepOptions {
        anchor: Some(0.0),
        initial_exponent: Some(0.25),
        ..SweepOptions::default()
    };
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("12 points, 4096 nodes", |b| {
        b.iter(|| continuation_sweep(&problem, &values, &init, &FlowConfig::default(), &options).unwrap())
    });
    g.finish();
}

criterion_group!(benches, profiles, flow, sweep);
criterion_main!(benches);
