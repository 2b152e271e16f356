use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use promissory::meadow::{detect_mvl_creep_with, parse_expr, solution_set_with};
use promissory::par::Execution;
use promissory::tuplix::{is_instance_of_with, parse_budget};

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn solution_sets(c: &mut Criterion) {
    let e = parse_expr("0 <= X <= 2 and 0 <= X/(X-1) <= 2").unwrap();
    let mut g = c.benchmark_group("solution_set");
    for bound in [16u32, 32] {
        for (name, exec) in STRATEGIES {
            g.bench_with_input(BenchmarkId::new(name, bound), &bound, |b, &bound| {
                b.iter(|| solution_set_with(black_box(&e), "X", bound, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn creep_scan(c: &mut Criterion) {
    let e = parse_expr("0 <= X <= 2 and X != 1 sand 0 < X/(X-1) < 2").unwrap();
    let mut g = c.benchmark_group("mvl_creep");
    for (name, exec) in STRATEGIES {
        g.bench_function(name, |b| b.iter(|| detect_mvl_creep_with(black_box(&e), 32, exec).unwrap()));
    }
    g.finish();
}

fn instance_search(c: &mut Criterion) {
    // nonlinear entries force the grid search
    let generic = parse_budget("vars: n, p\nfees: n*n*p\nvenue: -(p*p)\n").unwrap();
    let closed = parse_budget("fees: 27/2\nvenue: -9/4\n").unwrap();
    let mut g = c.benchmark_group("instance_search");
    for (name, exec) in STRATEGIES {
        g.bench_function(name, |b| {
            b.iter(|| is_instance_of_with(black_box(&closed), black_box(&generic), 24, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, solution_sets, creep_scan, instance_search);
criterion_main!(benches);
