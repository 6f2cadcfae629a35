use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tiebias_core::lens::*;
use tiebias_core::toylm::{batch_from_windows, forward, Corpus, ModelConfig, ModelParams};

fn config(tied: bool) -> ModelConfig {
    ModelConfig {
        vocab: 17,
        hidden: 8,
        layers: 3,
        heads: 2,
        context: 8,
        mlp_ratio: 4,
        tied,
        seed: 5,
    }
}

fn corpus(vocab: usize, len: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    Corpus {
        ids: (0..len).map(|_| rng.random_range(0..vocab)).collect(),
        labels: (0..vocab).map(|i| format!("t{i}")).collect(),
    }
}

fn short_training() -> LensTrainConfig {
    LensTrainConfig {
        steps: 30,
        lr: 1e-3,
        batch: 4,
        seed: 1,
    }
}

#[test]
fn final_layer_residual_is_zero() {
    for tied in [true, false] {
        let params = ModelParams::init(&config(tied)).unwrap();
        let c = corpus(17, 2000);
        let set = train_tuned_lens(&params, &c, &short_training()).unwrap();
        let profile = lens_profile(&params, &set, &c).unwrap();
        assert_eq!(profile.kl_bits.len(), 4);
        assert!(profile.kl_bits[3].abs() < 1e-6, "{:?}", profile.kl_bits);
        assert!(profile.kl_bits.iter().all(|&k| k >= 0.0));
    }
}

#[test]
fn untrained_translators_are_the_logit_lens() {
    let params = ModelParams::init(&config(true)).unwrap();
    let c = corpus(17, 2000);
    let set = train_tuned_lens(
        &params,
        &c,
        &LensTrainConfig {
            steps: 0,
            ..short_training()
        },
    )
    .unwrap();
    assert_eq!(set.translators, LensTranslatorSet::identity(3, 8).translators);
    let profile = lens_profile(&params, &set, &c).unwrap();

    // Independent per-position computation from logit-lens probabilities.
    let (_, held_out) = split_windows(&c, 8);
    let batch = batch_from_windows(&held_out);
    let cache = forward(&params, &batch.inputs, batch.batch, batch.seq).unwrap();
    let v = 17;
    let final_p = logit_lens(&params, cache.hidden(3));
    for layer in 0..3 {
        let q = logit_lens(&params, cache.hidden(layer));
        let mut total = 0.0;
        for (pr, qr) in final_p.chunks(v).zip(q.chunks(v)) {
            total += pr.iter().zip(qr).map(|(p, q)| p * (p / q).log2()).sum::<f64>();
        }
        let expect = total / batch.positions() as f64;
        assert!(
            (profile.kl_bits[layer] - expect).abs() < 1e-10,
            "layer {layer}: {} vs {expect}",
            profile.kl_bits[layer]
        );
    }
}

#[test]
fn zeroed_blocks_make_the_embedding_layer_exact() {
    let mut params = ModelParams::init(&config(true)).unwrap();
    let layout = params.layout.clone();
    for b in &layout.blocks {
        for r in [&b.w_proj, &b.b_proj, &b.w_out, &b.b_out] {
            params.data[r.clone()].fill(0.0);
        }
    }
    let c = corpus(17, 2000);
    let profile = lens_profile(&params, &LensTranslatorSet::identity(3, 8), &c).unwrap();
    for k in &profile.kl_bits {
        assert!(k.abs() < 1e-12, "{:?}", profile.kl_bits);
    }
}

#[test]
fn training_leaves_the_model_untouched_and_lowers_kl() {
    let mut params = ModelParams::init(&config(false)).unwrap();
    for x in &mut params.data {
        *x *= 6.0;
    }
    let before = params.clone();
    let c = corpus(17, 4000);
    let logit = lens_profile(&params, &LensTranslatorSet::identity(3, 8), &c).unwrap();
    let set = train_tuned_lens(
        &params,
        &c,
        &LensTrainConfig {
            steps: 300,
            lr: 1e-2,
            batch: 8,
            seed: 2,
        },
    )
    .unwrap();
    let tuned = lens_profile(&params, &set, &c).unwrap();
    assert_eq!(params, before);
    assert!(set.diverged.is_empty());
    assert!(tuned.kl_bits[0] < logit.kl_bits[0], "{:?} vs {:?}", tuned.kl_bits, logit.kl_bits);
}

#[test]
fn bits_are_nats_over_ln2() {
    assert!((nats_to_bits(std::f64::consts::LN_2) - 1.0).abs() < 1e-15);
    assert_eq!(nats_to_bits(0.0), 0.0);
}

#[test]
fn translators_round_trip_through_disk() {
    let params = ModelParams::init(&config(true)).unwrap();
    let c = corpus(17, 2000);
    let mut set = train_tuned_lens(&params, &c, &short_training()).unwrap();
    set.diverged = vec![1];
    let dir = tempfile::tempdir().unwrap();
    write_translators(&set, dir.path()).unwrap();
    let back = read_translators(dir.path()).unwrap();
    assert_eq!(back.translators, set.translators);
    assert_eq!(back.diverged, vec![1]);
    assert_eq!(back.steps, set.steps);
    assert_eq!(back.lr, set.lr);
}

#[test]
fn mismatched_translators_are_rejected() {
    let params = ModelParams::init(&config(true)).unwrap();
    let c = corpus(17, 2000);
    assert!(lens_profile(&params, &LensTranslatorSet::identity(2, 8), &c).is_err());
    assert!(lens_profile(&params, &LensTranslatorSet::identity(3, 4), &c).is_err());
}
