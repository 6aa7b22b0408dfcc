use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use misinfo_bench::{scored, tfidf_matrix, token_docs, tweets};
use misinfo_core::arabic_text::{preprocess, PreprocessConfig};
use misinfo_core::classifiers::train;
use misinfo_core::embeddings::train as train_embeddings;
use misinfo_core::eval::roc_auc;
use misinfo_core::features::{fit_vocabulary, transform_corpus};
use misinfo_core::{EmbedTrainConfig, ModelKind, ModelSpec, TfidfConfig};

fn text(c: &mut Criterion) {
    let raw = tweets(1000, 1);
    let cfg = PreprocessConfig::default();
    c.bench_function("preprocess_1k_tweets", |b| {
        b.iter(|| raw.iter().map(|(t, _)| preprocess(black_box(t), &cfg).len()).sum::<usize>())
    });
    let (docs, _) = token_docs(2000, 2);
    c.bench_function("tfidf_fit_transform_2k", |b| {
        b.iter(|| {
            let v = fit_vocabulary(black_box(&docs), &TfidfConfig::default()).unwrap();
            transform_corpus(&docs, &v).len()
        })
    });
}

fn metrics(c: &mut Criterion) {
    let (labels, scores) = scored(100_000, 3);
    c.bench_function("roc_auc_100k", |b| b.iter(|| roc_auc(black_box(&labels), black_box(&scores)).unwrap().1));
}

fn models(c: &mut Criterion) {
    let x = tfidf_matrix(1500, 4);
    let mut g = c.benchmark_group("train_tfidf_1500");
    g.sample_size(10);
    for kind in [ModelKind::Nb, ModelKind::Sgd, ModelKind::Svm, ModelKind::Rf, ModelKind::Gbt] {
        let spec = ModelSpec::reference(kind);
        g.bench_function(format!("{kind:?}").to_lowercase(), |b| b.iter(|| train(black_box(&x), &spec).unwrap()));
    }
    g.finish();
}

fn embeddings(c: &mut Criterion) {
    let (docs, _) = token_docs(2000, 5);
    let cfg = EmbedTrainConfig {
        dim: 50,
        epochs: 1,
        min_count: 2,
        ..Default::default()
    };
    let mut g = c.benchmark_group("embed_one_epoch_2k");
    g.sample_size(10);
    g.bench_function("cbow", |b| b.iter(|| train_embeddings(black_box(&docs), &cfg).unwrap().table.len()));
    g.finish();
}

criterion_group!(benches, text, metrics, models, embeddings);
criterion_main!(benches);
