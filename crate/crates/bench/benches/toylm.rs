use criterion::{criterion_group, criterion_main, Criterion};
use tiebias_core::toylm::{loss_and_grads, synthetic_text, Corpus, ModelConfig, TrainConfig, Trainer};

fn small(tied: bool) -> ModelConfig {
    ModelConfig {
        vocab: 256,
        hidden: 32,
        layers: 2,
        heads: 2,
        context: 32,
        mlp_ratio: 4,
        tied,
        seed: 0,
    }
}

fn train_step(c: &mut Criterion) {
    let corpus = Corpus::from_bytes(synthetic_text(0, 50_000).as_bytes());
    let tc = TrainConfig { batch: 8, ..TrainConfig::default() };
    let mut group = c.benchmark_group("train_step");
    for (name, cfg) in [("default_tied", ModelConfig::default()), ("small_tied", small(true)), ("small_untied", small(false))] {
        let mut trainer = Trainer::new(&cfg, &tc).unwrap();
        group.bench_function(name, |b| b.iter(|| trainer.step(&corpus.ids).unwrap()));
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let corpus = Corpus::from_bytes(synthetic_text(1, 20_000).as_bytes());
    let tc = TrainConfig { batch: 8, ..TrainConfig::default() };
    let mut trainer = Trainer::new(&small(true), &tc).unwrap();
    let batch = trainer.next_batch(&corpus.ids).unwrap();
    c.bench_function("loss_and_grads/small", |b| b.iter(|| loss_and_grads(&trainer.params, &batch, 1.0).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = train_step, gradients
}
criterion_main!(benches);
