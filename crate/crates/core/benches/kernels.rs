use std::path::PathBuf;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use heatflux::bench::{catalog_files, load_case, run_case, CaseFile, RunOptions};
use heatflux::closed_form::solve_exact;
use heatflux::fd::{self, FarField, Grid1D, SolverOptions};
use heatflux::par;
use heatflux::problem::{FluxLaw, InitialProfile, ProblemSpec, SourceShape};
use heatflux::volterra::{solve_volterra, Forcing, Kernel};

fn catalog() -> Vec<CaseFile> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("catalog");
    catalog_files(&dir).unwrap().iter().map(|p| load_case(p).unwrap()).collect()
}

fn catalog_run(c: &mut Criterion) {
    let cases = catalog();
    let opts = RunOptions::default();
    let mut g = c.benchmark_group("catalog");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| par::map(&cases, |case| run_case(case, &opts).unwrap().pass)));
    g.bench_function("sequential", |b| {
        b.iter(|| par::map_sequential(&cases, |case| run_case(case, &opts).unwrap().pass))
    });
    g.finish();
}

fn fd_ladder(c: &mut Criterion) {
    let spec = ProblemSpec::new(
        SourceShape::NegSin { lambda: 1.0, mu: 0.5 },
        FluxLaw::Linear { nu: 1.0 },
        InitialProfile::Monomial { eta: 2.0, m: 1.0 },
    );
    let exact = solve_exact(&spec).unwrap();
    let grids = Grid1D::new(8.0, 64, 1.0, 64, 0.5).unwrap().ladder(4);
    let run = |g: &Grid1D| fd::solve(&spec, *g, FarField::Manufactured(&exact), SolverOptions::default()).unwrap().last.t;
    let mut g = c.benchmark_group("fd_ladder");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| par::map(&grids, run)));
    g.bench_function("sequential", |b| b.iter(|| par::map_sequential(&grids, run)));
    g.finish();
}

fn volterra(c: &mut Criterion) {
    let k = Kernel::for_shape(&SourceShape::LinearX { lambda: 1.0 });
    let f = Forcing::for_profile(&InitialProfile::Monomial { eta: 1.0, m: 1.0 });
    let mut g = c.benchmark_group("volterra");
    for n in [250usize, 1000] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| solve_volterra(&k, &f, 1.0, 2.0, black_box(n)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, catalog_run, fd_ladder, volterra);
criterion_main!(benches);
