//! Sequential vs parallel execution of the two hot paths: featurizing a corpus
//! and cross-validating a model. Without the `parallel` feature both arms run
//! sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use toxmoral::baseline::ProviderMode;
use toxmoral::evaluation::{cross_validate_matrix, CvConfig};
use toxmoral::features::{feature_matrix, FeatureSet, Lexicons, Resources};
use toxmoral::lexicon::Lexicon;
use toxmoral::models::{ModelConfig, ModelKind};
use toxmoral::par::ExecMode;
use toxmoral::synth;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn resources() -> Resources {
    let emb = synth::embeddings(&Lexicon::default_moral(), 100, 1);
    Resources::new(Lexicons::bundled(), Some(emb), ProviderMode::Precomputed, None).unwrap()
}

fn featurize(c: &mut Criterion) {
    let corpus = synth::corpus(101, 303, 0.1, 1);
    let res = resources();
    let mut group = c.benchmark_group("feature_matrix");
    group.sample_size(20);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::new(name, corpus.len()), |b| {
            b.iter(|| feature_matrix(black_box(&corpus), FeatureSet::BaselinePsychMoral, &res, mode).unwrap())
        });
    }
    group.finish();
}

fn cross_validation(c: &mut Criterion) {
    let corpus = synth::corpus(101, 303, 0.1, 2);
    let res = resources();
    let fm = feature_matrix(&corpus, FeatureSet::BaselinePsychMoral, &res, ExecMode::Parallel).unwrap();
    let cv = CvConfig::new(5, 0);
    let mut group = c.benchmark_group("cross_validate");
    group.sample_size(10);
    for kind in ModelKind::ALL {
        let mut cfg = ModelConfig::new(kind);
        if kind == ModelKind::GradientBoosting {
            cfg = cfg.set("n_estimators", 100.0).unwrap();
        }
        for (name, mode) in MODES {
            group.bench_function(BenchmarkId::new(name, kind.short_name()), |b| {
                b.iter(|| cross_validate_matrix(black_box(&fm), &cfg, &cv, mode).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, featurize, cross_validation);
criterion_main!(benches);
