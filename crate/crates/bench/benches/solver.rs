use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relayfair::conic;
use relayfair::ia::{self, Ctx, IaConfig, IaOptions};
use relayfair_bench::Instance;

fn subproblem_solve(c: &mut Criterion) {
    let cfg = IaConfig::default();
    let mut group = c.benchmark_group("subproblem_solve");
    for n in [2, 4, 8] {
        let inst = Instance::reference(4, n, 0);
        let ctx = Ctx { chan: &inst.chan, params: &inst.params, eh: &inst.eh, cfg: &cfg };
        let start = ia::initialize(&ctx).unwrap();
        let sp = ia::build_subproblem(&ctx, &start).unwrap();
        let settings = IaOptions::default().solver;
        group.bench_with_input(BenchmarkId::from_parameter(n), &sp, |b, sp| {
            b.iter(|| conic::solve_with(&sp.program, &settings).unwrap())
        });
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let cfg = IaConfig::default();
    let inst = Instance::reference(4, 4, 0);
    let ctx = Ctx { chan: &inst.chan, params: &inst.params, eh: &inst.eh, cfg: &cfg };
    let opts = IaOptions::default();
    let mut group = c.benchmark_group("ia_run");
    group.sample_size(10);
    group.bench_function("k4_n4", |b| b.iter(|| ia::run(&ctx, &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, subproblem_solve, full_run);
criterion_main!(benches);
