use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use raman_twa::dynamics::{drift, TrajectoryState};
use raman_twa::ensemble::{run_paired, RunProtocol};
use raman_twa::model::{RampSchedule, SystemSpec};
use raman_twa::parallel::Execution;

fn short_protocol(n: u64) -> RunProtocol {
    RunProtocol {
        ramp: RampSchedule {
            t_ramp: 5.0,
            t_settle: 5.0,
            t_window: 10.0,
            ..RampSchedule::default()
        },
        ..RunProtocol::with_trajectories(n, 7)
    }
}

fn ensemble(c: &mut Criterion) {
    let spec = SystemSpec::paper_defaults(0.5);
    let protocol = short_protocol(32);
    let mut group = c.benchmark_group("paired_ensemble");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| run_paired(&spec, &protocol, exec).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let spec = SystemSpec::paper_defaults(0.5);
    let mut state = TrajectoryState::zeros(spec.mode_count());
    for (i, z) in state.a.iter_mut().chain(state.b.iter_mut()).enumerate() {
        *z = num_complex::Complex64::new((i as f64).sin(), (i as f64).cos());
    }
    c.bench_function("drift_n11", |b| b.iter(|| drift(&state, &spec, 1.0)));
}

criterion_group!(benches, ensemble, kernel);
criterion_main!(benches);
