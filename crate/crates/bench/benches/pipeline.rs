use std::hint::black_box;

use chronicle_bench::{load_event, synthetic_case, weekly_stream};
use chronicle_core::{
    brute_force_oracle, build_graph, evaluate_relations, extract_corpus, fit_linear, render_summary, ExtractorConfig,
    RenderOptions, WindowPolicy,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn relations(c: &mut Criterion) {
    let mut group = c.benchmark_group("relations");
    for size in [50, 200, 800] {
        let case = synthetic_case(size as u64, size);
        let n = case.messages.len();
        group.bench_with_input(BenchmarkId::new("engine", n), &case, |b, case| {
            b.iter(|| {
                evaluate_relations(
                    &case.messages,
                    &case.domain.relations,
                    &case.window,
                    &case.domain.ontology,
                )
            })
        });
        if size <= 200 {
            group.bench_with_input(BenchmarkId::new("oracle", n), &case, |b, case| {
                b.iter(|| {
                    brute_force_oracle(
                        &case.messages,
                        &case.domain.relations,
                        &case.window,
                        &case.domain.ontology,
                    )
                })
            });
        }
    }
    group.finish();
}

fn evolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_linear");
    for n in [10, 100, 1000] {
        let stream = weekly_stream(n as u64, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &stream, |b, s| {
            b.iter(|| fit_linear(black_box(s)))
        });
    }
    group.finish();
}

fn hostage(c: &mut Criterion) {
    let event = load_event("hostage");
    let window = WindowPolicy::new(1440);
    let config = ExtractorConfig::rules(&event.domain);
    c.bench_function("hostage/extract", |b| {
        b.iter(|| extract_corpus(&event.corpus, &event.domain, &config).unwrap())
    });
    let rels = evaluate_relations(&event.gold, &event.domain.relations, &window, &event.domain.ontology);
    let graph = build_graph(&event.gold, &rels, &window, &event.corpus.sources).unwrap();
    c.bench_function("hostage/render", |b| {
        b.iter(|| render_summary(&graph, &event.templates, &RenderOptions::default()).unwrap())
    });
}

criterion_group!(benches, relations, evolution, hostage);
criterion_main!(benches);
