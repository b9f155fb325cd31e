use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use routhkit::reconstruct::{reconstruct, LevelConnectionKind};
use routhkit::routh::{project_to_reduced, reduced_field, solve_level_set};
use routhkit_bench::{reduced, systems};

fn fields(c: &mut Criterion) {
    let mut g = c.benchmark_group("field");
    for p in systems() {
        let s = p.initial.clone();
        g.bench_with_input(BenchmarkId::new("el", &p.name), &s, |b, s| b.iter(|| p.system.el_field(black_box(s)).unwrap()));
        let rs = project_to_reduced(&p.level, &s);
        g.bench_with_input(BenchmarkId::new("reduced", &p.name), &rs, |b, rs| {
            b.iter(|| reduced_field(&p.system, &p.level, black_box(rs), None).unwrap())
        });
        g.bench_function(BenchmarkId::new("level_solve", &p.name), |b| {
            b.iter(|| solve_level_set(&p.system, &p.level, &s.x, &s.theta, &s.v_base, None).unwrap())
        });
    }
    g.finish();
}

// One second of simulated time at the acceptance step size.
fn pipelines(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline_1s");
    g.sample_size(10);
    for p in systems() {
        g.bench_function(BenchmarkId::new("simulate", &p.name), |b| {
            b.iter(|| p.system.simulate(&p.initial, 0.0, 1.0, 1e-3).unwrap())
        });
        g.bench_function(BenchmarkId::new("reduce", &p.name), |b| b.iter(|| reduced(&p, 1.0, 1e-3)));
        let red = reduced(&p, 1.0, 1e-3);
        let seed = p.level.theta_iso(&p.initial.theta);
        g.bench_function(BenchmarkId::new("reconstruct", &p.name), |b| {
            b.iter(|| reconstruct(&p.system, &p.level, &red, LevelConnectionKind::Mechanical, None, Some(&seed)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, fields, pipelines);
criterion_main!(benches);
