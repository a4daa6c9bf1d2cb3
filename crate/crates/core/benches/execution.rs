//! Sequential vs parallel execution.
//!
//! Window evaluation and scenario sweeps switch at run time through
//! `Execution`. The matmul kernels switch at compile time: compare
//! `cargo bench` with `cargo bench --no-default-features`.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stpotr::data::{generate_synthetic, window, MotionKind};
use stpotr::evaluation::{evaluate, EvalOptions};
use stpotr::follow::{run_scenarios, scenario_matrix, Forecaster, HumanPath, ScenarioConfig, StartSide};
use stpotr::model::{ModelConfig, StpotrModel};
use stpotr_tensor::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn evaluation(c: &mut Criterion) {
    let model = StpotrModel::new(ModelConfig::desk(), 0).unwrap();
    let seq = generate_synthetic(MotionKind::SCurveWalk, 12.0, 1).unwrap();
    let windows: Vec<_> = window(&seq, 2).unwrap().into_iter().take(32).collect();
    let mut group = c.benchmark_group("evaluate_32_windows");
    for (name, execution) in MODES {
        let opts = EvalOptions {
            warmup: 0,
            timed: 0,
            execution,
        };
        group.bench_function(name, |b| b.iter(|| evaluate(&model, &windows, &opts).unwrap()));
    }
    group.finish();
}

fn scenarios(c: &mut Criterion) {
    let base = ScenarioConfig {
        duration_s: 10.0,
        ..ScenarioConfig::default()
    };
    let configs = scenario_matrix(&HumanPath::ALL, &StartSide::ALL, &base);
    let mut group = c.benchmark_group("oracle_scenario_matrix");
    for (name, execution) in MODES {
        group.bench_function(name, |b| b.iter(|| run_scenarios(&configs, Forecaster::Oracle, execution)));
    }
    group.finish();
}

fn batched_forward(c: &mut Criterion) {
    let model = StpotrModel::new(ModelConfig::desk(), 0).unwrap();
    let seq = generate_synthetic(MotionKind::StraightWalk, 8.0, 2).unwrap();
    let windows = window(&seq, 1).unwrap();
    let kernels = if cfg!(feature = "parallel") { "parallel_kernels" } else { "sequential_kernels" };
    let mut group = c.benchmark_group("predict_batch");
    for batch in [1usize, 16] {
        let inputs: Vec<_> = windows[..batch]
            .iter()
            .map(|w| (w.input_pose.as_slice(), w.input_traj.as_slice()))
            .collect();
        group.bench_with_input(BenchmarkId::new(kernels, batch), &inputs, |b, inputs| {
            b.iter(|| model.predict_batch(inputs).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(3));
    targets = evaluation, scenarios, batched_forward
);
criterion_main!(benches);
