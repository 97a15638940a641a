use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use meaning_bench::{lexicon, session, DIALOG};
use meaning_core::abstraction::{default_probes, is_abstracting, AbstractionParams};
use meaning_core::describe::describe_own_concept;
use meaning_core::operator::apply_and;
use meaning_core::seed::fixtures;
use meaning_core::{ContextId, MeaningOperator, Region};

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    for n in [32, 64, 128] {
        let lex = lexicon(n);
        let car = lex.context(&ContextId::new("car")).unwrap().clone();
        let op = |w: &str| lex.lookup(w)[0].operator.clone();
        let very_fast = MeaningOperator::sequence(vec![op("very"), op("fast")]);
        let heavy = op("heavy").apply(&Region::empty(car.clone())).unwrap();
        group.bench_with_input(BenchmarkId::new("very fast on car", n), &n, |b, _| {
            b.iter(|| very_fast.apply(black_box(&heavy)).unwrap())
        });
        let fast = op("fast").apply(&Region::empty(car)).unwrap();
        group.bench_with_input(BenchmarkId::new("and", n), &n, |b, _| {
            b.iter(|| apply_and(black_box(&fast), black_box(&heavy)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("stats", n), &n, |b, _| b.iter(|| black_box(&heavy).stats()));
    }
    group.finish();
}

fn interpretation(c: &mut Criterion) {
    let mut group = c.benchmark_group("interpretation");
    group.sample_size(20);
    for n in [32, 64] {
        let lex = lexicon(n);
        group.bench_with_input(BenchmarkId::new("dialog", n), &n, |b, &n| {
            b.iter(|| {
                let mut s = session(&lex, n);
                for p in DIALOG {
                    black_box(s.interpret(p));
                }
            })
        });
    }
    group.finish();
}

fn description(c: &mut Criterion) {
    let mut group = c.benchmark_group("description");
    group.sample_size(10);
    let lex = lexicon(32);
    group.bench_function("slow", |b| b.iter(|| describe_own_concept(black_box("slow"), &lex).unwrap()));
    let toy = fixtures::describe_toy(32).unwrap();
    group.bench_function("toy refinement", |b| b.iter(|| meaning_core::describe::describe(black_box(&toy)).unwrap()));
    let q = lex.context(&ContextId::new("quickness")).unwrap().clone();
    let probes = default_probes(&q, 32).unwrap();
    let params = AbstractionParams::new(0.05, 0.05).unwrap();
    let very = MeaningOperator::hedge("very").unwrap();
    let not = MeaningOperator::hedge("not").unwrap();
    group.bench_function("abstraction check", |b| {
        b.iter(|| is_abstracting(&very, std::slice::from_ref(&not), &q.axes, &params, black_box(&probes)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, operators, interpretation, description);
criterion_main!(benches);
