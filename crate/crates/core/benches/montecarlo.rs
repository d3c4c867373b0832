use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use gue_quench::ensemble::{default_grid, dos_mc};
use gue_quench::montecarlo::{estimate_work_pdf, BinSpec, McConfig};
use gue_quench::{Execution, GueParams, LevelSampler, SamplingPlan};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn work_pdf(c: &mut Criterion) {
    let pi = GueParams::new(2, 0.0, 1.0).unwrap();
    let pf = GueParams::new(2, 0.0, 0.25).unwrap();
    let bins = BinSpec::default_for(&pi, &pf);
    let n = 200_000;
    let mut group = c.benchmark_group("work_pdf_n2");
    group.throughput(Throughput::Elements(n));
    group.sample_size(10);
    for (name, mode) in MODES {
        let cfg = McConfig::new(
            SamplingPlan::new(n, 1, 8).unwrap().with_execution(mode),
            bins,
        );
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| estimate_work_pdf(&pi, &pf, 0.1, &cfg).unwrap())
        });
    }
    group.finish();
}

fn density_of_states(c: &mut Criterion) {
    let p = GueParams::new(16, 0.0, 1.0).unwrap();
    let spec = default_grid(&p);
    let n = 2_000;
    let mut group = c.benchmark_group("dos_n16");
    group.throughput(Throughput::Elements(n));
    group.sample_size(10);
    for (name, mode) in MODES {
        let plan = SamplingPlan::new(n, 2, 8).unwrap().with_execution(mode);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| dos_mc(&p, &spec, &plan, LevelSampler::Matrix).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, work_pdf, density_of_states);
criterion_main!(benches);
