//! Pipeline benchmarks: training, tokenization, and chain compression.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use morpho_hebb::compress::{compress_chain, ProjectorChain, COMPRESS_TOL};
use morpho_hebb::hierarchy::{Hierarchy, TrainConfig};
use morpho_hebb::stream::normalize_text;
use morpho_hebb::tokenizer::tokenize;
use morpho_hebb::Alphabet;

fn alice_prefix(chars: usize) -> String {
    let raw = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../fixtures/alice.txt"
    ))
    .expect("fixtures/alice.txt");
    raw.chars().take(chars).collect()
}

fn train(raw: &str, max_level: usize) -> Hierarchy {
    let a = Alphabet::latin();
    let stream = normalize_text(raw, &a);
    Hierarchy::grow_from_text(&stream, a, &TrainConfig::accumulating(vec![], max_level)).unwrap()
}

fn bench_train(c: &mut Criterion) {
    let raw = alice_prefix(10_000);
    c.bench_function("train/alice-10k", |b| {
        b.iter(|| black_box(train(black_box(&raw), 24)))
    });
}

fn bench_tokenize(c: &mut Criterion) {
    let h = train(&alice_prefix(10_000), 24);
    c.bench_function("tokenize/whiterabbit", |b| {
        b.iter(|| black_box(tokenize(&h, black_box("whiterabbit")).unwrap()))
    });
}

fn bench_compress(c: &mut Criterion) {
    let h = train(&alice_prefix(2_000), 24);
    let pc = ProjectorChain::word_indicator(&h, "rabbit").unwrap();
    c.bench_function("compress/rabbit-indicator", |b| {
        b.iter(|| black_box(compress_chain(black_box(&pc), COMPRESS_TOL).unwrap()))
    });
}

criterion_group!(benches, bench_train, bench_tokenize, bench_compress);
criterion_main!(benches);
