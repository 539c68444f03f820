use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use timely_tracking::metrics::Theta;
use timely_tracking::model::{geometric_population, ErrorModel, TestPolicy};
use timely_tracking::montecarlo::{simulate_person, SimConfig, SimMetric};
use timely_tracking::optimize::{alternating_minimize, AlternatingOptions};
use timely_tracking::{par, Execution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn restarts(c: &mut Criterion) {
    let pop = geometric_population(10, 0.9, 1.1, 6.0, 4.0).unwrap();
    let mut group = c.benchmark_group("alternating_30_restarts");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = AlternatingOptions {
            restarts: 30,
            exec,
            ..AlternatingOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| alternating_minimize(black_box(&pop), 16.0, Theta::HALF, &opts).unwrap())
        });
    }
    group.finish();
}

fn simulation_grid(c: &mut Criterion) {
    let pop = geometric_population(10, 0.9, 1.1, 6.0, 4.0).unwrap();
    let error = ErrorModel::new(0.1, 0.1).unwrap();
    let mut group = c.benchmark_group("simulation_grid_10_people");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                par::map(exec, (0..pop.len()).collect(), |i| {
                    let cfg = SimConfig::new(1e5, 3).unwrap().with_stream(i as u64);
                    simulate_person(
                        &pop[i],
                        &TestPolicy::single(1.5).unwrap(),
                        &error,
                        SimMetric::RealTime { theta: Theta::HALF },
                        &cfg,
                    )
                    .unwrap()
                    .total
                    .mean
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, restarts, simulation_grid);
criterion_main!(benches);
