//! Ancestral sampling from the generative model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{BlockCounts, EmbeddingSequence, LabelSequence};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::net::SpeakerThread;
use crate::scalar::Scalar;
use crate::train::Utterance;

#[derive(Clone, Debug)]
pub struct Sampled<S> {
    pub embeddings: EmbeddingSequence<S>,
    pub labels: LabelSequence,
    /// `ln p(X, Y)` accumulated while sampling, on the stored (rounded) values.
    pub log_prob: f64,
}

/// Draws one utterance of length `len`: labels from the change and ddCRP
/// prior, embeddings from the speaker threads.
pub fn sample_utterance<S: Scalar, R: Rng + ?Sized>(model: &ModelParams<S>, len: usize, rng: &mut R) -> Result<Sampled<S>> {
    if len == 0 {
        return Err(Error::EmptySequence);
    }
    model.validate()?;
    let sigma = model.sigma2().sqrt();
    let p0 = model.prior.p0;
    let alpha = model.prior.alpha;
    let fresh = SpeakerThread::fresh(&model.net);
    let mut threads: Vec<SpeakerThread> = Vec::new();
    let mut blocks: Option<BlockCounts> = None;
    let mut labels = Vec::with_capacity(len);
    let mut rows = Vec::with_capacity(len);
    let mut log_prob = 0.0;

    for _ in 0..len {
        let speaker = match &mut blocks {
            None => {
                blocks = Some(BlockCounts::first());
                1
            }
            Some(b) => {
                let changed = rng.random::<f64>() < 1.0 - p0;
                let speaker = if changed {
                    log_prob += (1.0 - p0).ln();
                    let mass = b.switch_mass() as f64 + alpha;
                    let mut u = rng.random::<f64>() * mass;
                    let mut pick = b.num_speakers() + 1;
                    for (i, &n) in b.counts().iter().enumerate() {
                        if i + 1 == b.last_speaker() {
                            continue;
                        }
                        if u < n as f64 {
                            pick = i + 1;
                            break;
                        }
                        u -= n as f64;
                    }
                    let weight = if pick > b.num_speakers() { alpha } else { b.count(pick) as f64 };
                    log_prob += (weight / mass).ln();
                    pick
                } else {
                    log_prob += p0.ln();
                    b.last_speaker()
                };
                b.advance(speaker)?;
                speaker
            }
        };
        if speaker > threads.len() {
            threads.push(fresh.clone());
        }
        let thread = &mut threads[speaker - 1];
        let row: Vec<S> = thread
            .predicted_mean()
            .into_iter()
            .map(|mu| S::of(mu + sigma * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let x: Vec<f64> = row.iter().map(|v| v.wide()).collect();
        log_prob += thread.emission_log_prob(&x, model.sigma2());
        thread.observe(&model.net, &x);
        labels.push(speaker);
        rows.push(row);
    }
    Ok(Sampled {
        embeddings: EmbeddingSequence::from_rows(rows)?,
        labels: LabelSequence::new(labels)?,
        log_prob,
    })
}

pub fn sample_utterance_seeded<S: Scalar>(model: &ModelParams<S>, len: usize, seed: u64) -> Result<Sampled<S>> {
    sample_utterance(model, len, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `num` utterances from one seeded stream, with ids `utt-<i>`.
pub fn sample_corpus<S: Scalar>(model: &ModelParams<S>, num: usize, len: usize, seed: u64) -> Result<Vec<Utterance<S>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num)
        .map(|i| {
            let s = sample_utterance(model, len, &mut rng)?;
            Utterance::new(format!("utt-{i:05}"), s.embeddings, s.labels)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::joint_log_prob;
    use crate::net::NetDims;
    use crate::prior::PriorParams;

    fn model(p0: f64) -> ModelParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        ModelParams::random(NetDims { input: 3, hidden: 5, fc: 4 }, 0.2, PriorParams::new(p0, 1.0).unwrap(), &mut rng).unwrap()
    }

    #[test]
    fn no_changes_when_p0_is_one() {
        let s = sample_utterance_seeded(&model(1.0), 40, 3).unwrap();
        assert!(s.labels.as_slice().iter().all(|&k| k == 1));
    }

    #[test]
    fn change_rate_concentrates() {
        let m = model(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (mut changes, mut transitions) = (0, 0);
        for _ in 0..100 {
            let s = sample_utterance(&m, 101, &mut rng).unwrap();
            let z = s.labels.change_indicators();
            changes += z.num_changes();
            transitions += z.len();
        }
        assert_eq!(transitions, 10_000);
        let rate = changes as f64 / transitions as f64;
        assert!((rate - 0.3).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn accumulated_log_prob_matches_scoring() {
        for seed in 0..20 {
            let m = model(0.6);
            let s = sample_utterance_seeded(&m, 25, seed).unwrap();
            let joint = joint_log_prob(&s.embeddings, &s.labels, &m).unwrap().total();
            assert!(joint.is_finite());
            assert!((joint - s.log_prob).abs() < 1e-10, "{joint} vs {}", s.log_prob);
        }
        let m32 = model(0.6).cast::<f32>();
        let s = sample_utterance_seeded(&m32, 25, 1).unwrap();
        let joint = joint_log_prob(&s.embeddings, &s.labels, &m32).unwrap().total();
        assert!((joint - s.log_prob).abs() < 1e-10);
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let m = model(0.8);
        let a = sample_corpus(&m, 3, 10, 5).unwrap();
        let b = sample_corpus(&m, 3, 10, 5).unwrap();
        assert_eq!(a, b);
        assert!(sample_utterance_seeded(&m, 0, 1).is_err());
    }
}
