//! Sequential versus parallel execution of the main kernels.
//!
//! Run with `cargo bench -p fk-rigidity`; each group benchmarks the same
//! input under both execution policies.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fk_rigidity::angular::decompose;
use fk_rigidity::calculus::lap;
use fk_rigidity::diagnostics::{kappa_report, DiagnosticsOptions, Kappa0Choice, ThetaInfSource};
use fk_rigidity::examples::ExampleId;
use fk_rigidity::examples::{build_example1, build_example4, SemilinearProfile};
use fk_rigidity::exec::{set_execution, Execution};
use fk_rigidity::pipeline::{sweep, ExampleSelector, RunOptions};
use fk_rigidity::solver::{relax, Boundary, Potential, SolverConfig};
use fk_rigidity::{make_window, ScalarField};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn laplacian(c: &mut Criterion) {
    let mut group = c.benchmark_group("laplacian");
    let u = build_example4(0.05, &SemilinearProfile::sine_gordon()).unwrap().field(10.0).unwrap();
    for (name, policy) in POLICIES {
        set_execution(policy);
        group.bench_function(BenchmarkId::new(name, u.window().core_len()), |b| b.iter(|| lap(black_box(&u)).unwrap()));
    }
    group.finish();
}

fn angular(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    let u = build_example1(0.05).unwrap().field(10.0).unwrap();
    for (name, policy) in POLICIES {
        set_execution(policy);
        group.bench_function(BenchmarkId::new(name, u.window().core_len()), |b| {
            b.iter(|| decompose(black_box(&u)).unwrap())
        });
    }
    group.finish();
}

fn kappas(c: &mut Criterion) {
    let mut group = c.benchmark_group("kappa_report");
    group.sample_size(20);
    for h in [0.125, 0.0625] {
        let spec = build_example1(h).unwrap();
        let u = spec.field(10.0).unwrap();
        let opts = DiagnosticsOptions {
            theta_inf: ThetaInfSource::Given { plus: spec.theta_inf, minus: spec.theta_inf },
            kappa0: Kappa0Choice::Window,
            tails: true,
            worst_sites: 5,
        };
        for (name, policy) in POLICIES {
            set_execution(policy);
            group.bench_function(BenchmarkId::new(name, h), |b| {
                b.iter(|| kappa_report(black_box(&u), &spec.source, &opts).unwrap())
            });
        }
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    let selector = ExampleSelector::new(ExampleId::Bump);
    let opts = RunOptions { tails: false, ..Default::default() };
    for (name, policy) in POLICIES {
        set_execution(policy);
        group.bench_function(name, |b| b.iter(|| sweep(&selector, black_box(&[0.5, 0.25, 0.125]), &opts).unwrap()));
    }
    group.finish();
}

fn relaxation(c: &mut Criterion) {
    let mut group = c.benchmark_group("relax");
    group.sample_size(10);
    let h = 0.1;
    let w = make_window(h, 4.0, 1).unwrap();
    let u0 = ScalarField::from_fn(w, move |s| 4.0 * (h * s.k2 as f64).exp().atan()).unwrap();
    let pot = Potential::sine_gordon(1.0).unwrap();
    let cfg = SolverConfig { max_iters: 200, boundary: Boundary::Cylinder, ..Default::default() };
    for (name, policy) in POLICIES {
        set_execution(policy);
        group.bench_function(BenchmarkId::new(name, w.core_len()), |b| {
            b.iter(|| relax(black_box(&u0), &pot, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, laplacian, angular, kappas, sweeps, relaxation);
criterion_main!(benches);
