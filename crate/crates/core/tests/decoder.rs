mod common;

use std::collections::HashSet;

use common::{random_model, rng};
use rand::Rng;
use uisrnn::decode::{beam_search, decode, decode_all, decode_beam, decode_greedy, exhaustive_decode, DecodeConfig};
use uisrnn::net::NetDims;
use uisrnn::sample::sample_utterance;
use uisrnn::{Error, PriorParams};

const DIMS: NetDims = NetDims { input: 3, hidden: 4, fc: 4 };

#[test]
fn surviving_hypotheses_match_a_fresh_rescoring() {
    for seed in 0..30 {
        let mut r = rng(seed);
        let model = random_model(&mut r, DIMS, 2.0);
        let len = r.random_range(1..=6);
        let x = sample_utterance(&model, len, &mut r).unwrap().embeddings;
        let width = r.random_range(1..=12);
        let (best, beam) = beam_search(&x, &model, &DecodeConfig::with_beam(width)).unwrap();
        assert!(beam.len() <= width);
        let mut seen = HashSet::new();
        for hyp in &beam {
            let fresh = hyp.recompute_log_prob(&x, &model).unwrap();
            assert!((fresh - hyp.log_prob()).abs() <= 1e-10, "seed {seed}: {fresh} vs {}", hyp.log_prob());
            assert!(seen.insert(hyp.labels().to_vec()), "duplicate hypothesis {:?}", hyp.labels());
        }
        assert_eq!(best.log_prob, beam.iter().map(|h| h.log_prob()).fold(f64::NEG_INFINITY, f64::max));
    }
}

#[test]
fn greedy_never_revises_a_decision() {
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let model = random_model(&mut r, DIMS, 2.0);
        let x = sample_utterance(&model, 40, &mut r).unwrap().embeddings;
        let full = decode_greedy(&x, &model, &DecodeConfig::greedy()).unwrap();
        for len in [1, 7, 20, 39] {
            let part = decode_greedy(&x.prefix(len), &model, &DecodeConfig::greedy()).unwrap();
            assert_eq!(part.labels.as_slice(), &full.labels.as_slice()[..len]);
        }
    }
}

#[test]
fn speaker_cap_is_never_exceeded() {
    let mut r = rng(7);
    let mut model = random_model(&mut r, DIMS, 3.0);
    // Frequent changes and a large concentration produce many speakers.
    model.prior = PriorParams::new(0.3, 10.0).unwrap();
    let x = sample_utterance(&model, 80, &mut r).unwrap().embeddings;
    let uncapped = decode_greedy(&x, &model, &DecodeConfig::greedy()).unwrap();
    assert!(uncapped.labels.num_speakers() > 3);
    for cap in [1, 2, 3] {
        for beam in [1, 4] {
            let config = DecodeConfig { max_speakers: Some(cap), ..DecodeConfig::with_beam(beam) };
            let d = decode(&x, &model, &config).unwrap();
            assert!(d.labels.num_speakers() <= cap, "cap {cap} beam {beam}: {} speakers", d.labels.num_speakers());
            assert!(d.max_candidates_per_step <= cap + 1);
        }
    }
}

#[test]
fn look_ahead_keeps_output_canonical_and_zero_is_plain_beam() {
    for seed in 0..10 {
        let mut r = rng(200 + seed);
        let model = random_model(&mut r, DIMS, 2.0);
        let x = sample_utterance(&model, 25, &mut r).unwrap().embeddings;
        let plain = decode_beam(&x, &model, &DecodeConfig::with_beam(4)).unwrap();
        let zero = decode_beam(&x, &model, &DecodeConfig { look_ahead: 0, ..DecodeConfig::with_beam(4) }).unwrap();
        assert_eq!(plain, zero);
        for look_ahead in [1, 3, 30] {
            let d = decode_beam(&x, &model, &DecodeConfig { look_ahead, ..DecodeConfig::with_beam(4) }).unwrap();
            assert_eq!(d.labels.len(), 25);
            let rescored = uisrnn::joint_log_prob(&x, &d.labels, &model).unwrap().total();
            assert!((rescored - d.log_prob).abs() < 1e-9);
        }
    }
}

#[test]
fn parallel_decoding_keeps_input_order() {
    let mut r = rng(9);
    let model = random_model(&mut r, DIMS, 2.0);
    let xs: Vec<_> = (0..17).map(|i| sample_utterance(&model, 5 + i, &mut r).unwrap().embeddings).collect();
    let refs: Vec<_> = xs.iter().collect();
    let config = DecodeConfig::with_beam(3);
    let serial: Vec<_> = xs.iter().map(|x| decode(x, &model, &config).unwrap()).collect();
    for workers in [1, 2, 5] {
        assert_eq!(decode_all(&refs, &model, &config, workers).unwrap(), serial);
    }
}

#[test]
fn oracle_refuses_long_inputs() {
    let mut r = rng(3);
    let model = random_model(&mut r, DIMS, 1.0);
    let x = sample_utterance(&model, 13, &mut r).unwrap().embeddings;
    assert!(matches!(exhaustive_decode(&x, &model), Err(Error::OracleGuard { .. })));
}

#[test]
fn single_precision_storage_decodes_like_double() {
    let mut r = rng(21);
    let model = random_model(&mut r, DIMS, 3.0);
    let x = sample_utterance(&model, 30, &mut r).unwrap().embeddings;
    let model32 = model.cast::<f32>();
    let x32 = uisrnn::EmbeddingsF32::from_rows(x.to_rows().into_iter().map(|row| row.into_iter().map(|v| v as f32).collect()).collect()).unwrap();
    let d64 = decode_greedy(&x, &model, &DecodeConfig::greedy()).unwrap();
    let d32 = decode_greedy(&x32, &model32, &DecodeConfig::greedy()).unwrap();
    let error = uisrnn::metrics::label_error_rate(&d64.labels, &d32.labels).unwrap();
    assert!(error <= 0.1, "f32 decode differs on {:.0}% of steps", error * 100.0);
    if error == 0.0 {
        assert!((d64.log_prob - d32.log_prob).abs() < 1e-3 * d64.log_prob.abs());
    }
}
