use criterion::{black_box, criterion_group, criterion_main, Criterion};
use dse_bench::synthetic_ledger;
use dse_core::{
    build_graph, count_macs, count_params, explore, modified_netscore, select_best, EvaluationRecord, EvaluatorConfig,
    HeadStyle, NetScoreWeights, RecordSource, RunLedger, SearchSpace, SurrogateParams, Theta,
};

fn bench_arch(c: &mut Criterion) {
    let theta = Theta::new(1.3, 224).unwrap();
    c.bench_function("build_graph", |b| b.iter(|| build_graph(black_box(theta), 21, HeadStyle::Ssdlite).unwrap()));
    let graph = build_graph(theta, 21, HeadStyle::Ssdlite).unwrap();
    c.bench_function("count_params", |b| b.iter(|| count_params(black_box(&graph))));
    c.bench_function("count_macs", |b| b.iter(|| count_macs(black_box(&graph))));
}

fn bench_score(c: &mut Criterion) {
    let theta = Theta::new(1.0, 224).unwrap();
    let record = EvaluationRecord::new(theta, 71.8, 3.47, 0.12, RecordSource::MeasuredFile).unwrap();
    let weights = NetScoreWeights::default();
    c.bench_function("modified_netscore", |b| b.iter(|| modified_netscore(black_box(&record), &weights).unwrap()));
}

fn bench_search(c: &mut Criterion) {
    let ledger = synthetic_ledger(1000);
    c.bench_function("select_best_1000", |b| b.iter(|| select_best(black_box(&ledger)).unwrap()));

    let space = SearchSpace::default();
    let config = EvaluatorConfig::surrogate(SurrogateParams::default());
    let weights = NetScoreWeights::default();
    c.bench_function("explore_default_grid_surrogate", |b| {
        b.iter(|| {
            let mut ledger = RunLedger::new(weights, space.clone());
            explore(&space, &config, &weights, &mut ledger).unwrap()
        })
    });
}

criterion_group!(benches, bench_arch, bench_score, bench_search);
criterion_main!(benches);
