use criterion::{criterion_group, criterion_main, Criterion};
use homerule::detect::detect_all;
use homerule::fixtures;
use homerule::maude::{lower_system_to_maude, render_maude};

fn detection(c: &mut Criterion) {
    let mut group = c.benchmark_group("detect_all");
    for f in fixtures::ALL {
        let sys = f.system().expect("fixtures build");
        group.bench_function(f.name, |b| b.iter(|| detect_all(&sys)));
    }
    group.finish();
}

fn emission(c: &mut Criterion) {
    let sys = fixtures::CASE_STUDY.system().expect("fixtures build");
    c.bench_function("emit_maude/case_study", |b| b.iter(|| render_maude(&lower_system_to_maude(&sys))));
}

fn build(c: &mut Criterion) {
    let f = fixtures::CASE_STUDY.parse().expect("fixtures parse");
    c.bench_function("build_system/case_study", |b| b.iter(|| f.system().expect("fixtures build")));
}

criterion_group!(benches, detection, emission, build);
criterion_main!(benches);
