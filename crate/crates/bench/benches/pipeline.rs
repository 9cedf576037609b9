use std::hint::black_box;

use causal_bench::{planted, planted_pairs};
use causal_core::eval::{build_queries, rank_by_scores, recall_at_n_gold, EvalSettings};
use causal_core::frames::{tokenize, unigram_bleu};
use causal_core::model::score_pair;
use causal_core::seed::component_rng;
use causal_core::{FixtureDetector, HashEncoder, ModelParams};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;

fn bleu(c: &mut Criterion) {
    let reference = tokenize(
        "A young girl in a red coat throws a bright frisbee towards the dog on the grass.",
    );
    let candidate: Vec<String> = [
        "girl", "frisbee", "dog", "grass", "tree", "coat", "dog", "bench", "sky", "ball",
    ]
    .map(String::from)
    .to_vec();
    c.bench_function("unigram_bleu/10x17", |b| {
        b.iter(|| unigram_bleu(black_box(&candidate), black_box(&reference)))
    });
}

fn scoring(c: &mut Criterion) {
    let encoder = HashEncoder::new(64, 0).unwrap();
    let params = ModelParams::random(64, 200, 0);
    let pair = planted_pairs(1).remove(0);
    c.bench_function("score_pair/d64_h200", |b| {
        b.iter(|| score_pair(black_box(&params), &encoder, black_box(&pair), 10).unwrap())
    });
}

fn recall(c: &mut Criterion) {
    let videos = planted(200);
    let queries = build_queries(&videos, &FixtureDetector, &EvalSettings::default()).unwrap();
    let mut rng = component_rng(0, "bench-recall");
    let rankings: Vec<Vec<usize>> = queries
        .iter()
        .map(|q| {
            rank_by_scores(
                &(0..q.candidates.len())
                    .map(|_| rng.random::<f64>())
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let golds: Vec<&[usize]> = queries.iter().map(|q| q.gold.as_slice()).collect();
    c.bench_function("recall_at_10/200_queries", |b| {
        b.iter(|| recall_at_n_gold(black_box(&golds), black_box(&rankings), 10).unwrap())
    });
}

criterion_group!(benches, bleu, scoring, recall);
criterion_main!(benches);
