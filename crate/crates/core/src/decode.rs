//! MAP decoding: online greedy search, beam search, and an exhaustive
//! enumeration oracle for short utterances.
//!
//! Candidates at each step are ordered continuation first, then existing
//! speakers by ascending id, then the new speaker. Ties in score keep that
//! order, so decoding is deterministic.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BlockCounts, EmbeddingSequence, LabelSequence};
use crate::error::{Error, Result};
use crate::model::{joint_log_prob, ModelParams};
use crate::net::SpeakerThread;
use crate::prior::push_candidates;
use crate::scalar::Scalar;

/// Largest `T` accepted by [`exhaustive_decode`].
pub const ORACLE_MAX_LEN: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Upper bound on the number of speakers per utterance.
    pub max_speakers: Option<usize>,
    /// Frames of delay before a label is committed; 0 commits only at the end.
    pub look_ahead: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_width: 10,
            max_speakers: None,
            look_ahead: 0,
        }
    }
}

impl DecodeConfig {
    pub fn greedy() -> Self {
        DecodeConfig {
            beam_width: 1,
            ..Default::default()
        }
    }

    pub fn with_beam(beam_width: usize) -> Self {
        DecodeConfig {
            beam_width,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(Error::InvalidParameter("beam width must be at least 1".into()));
        }
        if self.max_speakers == Some(0) {
            return Err(Error::InvalidParameter("max speakers must be at least 1".into()));
        }
        Ok(())
    }
}

/// A partial labelling with its sufficient statistics.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    labels: Vec<usize>,
    threads: Vec<Arc<SpeakerThread>>,
    blocks: Option<BlockCounts>,
    log_prob: f64,
}

impl Default for Hypothesis {
    fn default() -> Self {
        Self::empty()
    }
}

impl Hypothesis {
    pub fn empty() -> Self {
        Hypothesis {
            labels: Vec::new(),
            threads: Vec::new(),
            blocks: None,
            log_prob: 0.0,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }

    pub fn threads(&self) -> impl Iterator<Item = &SpeakerThread> {
        self.threads.iter().map(|t| t.as_ref())
    }

    pub fn num_speakers(&self) -> usize {
        self.threads.len()
    }

    /// Applies one scored candidate.
    pub fn extend<S: Scalar>(&self, candidate: &StepCandidate, x: &[f64], model: &ModelParams<S>, fresh: &SpeakerThread) -> Hypothesis {
        let mut next = self.clone();
        next.push(candidate, x, model, fresh);
        next
    }

    fn push<S: Scalar>(&mut self, candidate: &StepCandidate, x: &[f64], model: &ModelParams<S>, fresh: &SpeakerThread) {
        let k = candidate.speaker;
        if k > self.threads.len() {
            self.threads.push(Arc::new(fresh.clone()));
        }
        Arc::make_mut(&mut self.threads[k - 1]).observe(&model.net, x);
        match &mut self.blocks {
            Some(b) => b.advance(k).expect("candidate labels are canonical"),
            None => self.blocks = Some(BlockCounts::first()),
        }
        self.labels.push(k);
        self.log_prob += candidate.log_prob;
    }

    /// Recomputes the cumulative log-probability from scratch.
    pub fn recompute_log_prob<S: Scalar>(&self, x: &EmbeddingSequence<S>, model: &ModelParams<S>) -> Result<f64> {
        let y = LabelSequence::new(self.labels.clone())?;
        Ok(joint_log_prob(&x.prefix(self.labels.len()), &y, model)?.total())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepCandidate {
    pub speaker: usize,
    pub changed: bool,
    /// Change, assignment and emission terms for this step.
    pub log_prob: f64,
}

/// Scores every admissible next label for `hyp` given observation `x`.
pub fn step_scores<S: Scalar>(hyp: &Hypothesis, x: &[f64], model: &ModelParams<S>, config: &DecodeConfig) -> Vec<StepCandidate> {
    let fresh = SpeakerThread::fresh(&model.net);
    let mut out = Vec::new();
    let mut prior = Vec::new();
    score_into(hyp.blocks.as_ref(), &hyp.threads, x, model, config, &fresh, &mut prior, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn score_into<S: Scalar, T: AsRef<SpeakerThread>>(
    blocks: Option<&BlockCounts>,
    threads: &[T],
    x: &[f64],
    model: &ModelParams<S>,
    config: &DecodeConfig,
    fresh: &SpeakerThread,
    prior: &mut Vec<crate::prior::Candidate>,
    out: &mut Vec<StepCandidate>,
) {
    out.clear();
    let sigma2 = model.sigma2();
    let Some(blocks) = blocks else {
        out.push(StepCandidate {
            speaker: 1,
            changed: false,
            log_prob: fresh.emission_log_prob(x, sigma2),
        });
        return;
    };
    prior.clear();
    push_candidates(blocks, &model.prior, prior);
    let capped = config.max_speakers.is_some_and(|c| blocks.num_speakers() >= c);
    for c in prior.iter() {
        let thread = match threads.get(c.speaker - 1) {
            Some(t) => t.as_ref(),
            None if capped => continue,
            None => fresh,
        };
        out.push(StepCandidate {
            speaker: c.speaker,
            changed: c.changed,
            log_prob: c.log_prior + thread.emission_log_prob(x, sigma2),
        });
    }
}

impl AsRef<SpeakerThread> for SpeakerThread {
    fn as_ref(&self) -> &SpeakerThread {
        self
    }
}

/// Output of a decoder run.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub labels: LabelSequence,
    pub log_prob: f64,
    /// Largest number of candidates scored for a single hypothesis at any step.
    pub max_candidates_per_step: usize,
}

fn check_input<S: Scalar>(x: &EmbeddingSequence<S>, model: &ModelParams<S>, config: &DecodeConfig) -> Result<()> {
    config.validate()?;
    if x.is_empty() {
        return Err(Error::EmptySequence);
    }
    if x.dim() != model.dims().input {
        return Err(Error::DimensionMismatch {
            what: "embedding dimension",
            expected: model.dims().input,
            got: x.dim(),
        });
    }
    Ok(())
}

/// Online greedy decoding: commits the best candidate at every step.
pub fn decode_greedy<S: Scalar>(x: &EmbeddingSequence<S>, model: &ModelParams<S>, config: &DecodeConfig) -> Result<Decoded> {
    check_input(x, model, config)?;
    let fresh = SpeakerThread::fresh(&model.net);
    let mut threads: Vec<SpeakerThread> = Vec::new();
    let mut blocks: Option<BlockCounts> = None;
    let mut labels = Vec::with_capacity(x.len());
    let mut log_prob = 0.0;
    let mut prior = Vec::new();
    let mut scored = Vec::new();
    let mut max_candidates = 0;
    let mut xt = Vec::with_capacity(x.dim());
    for t in 0..x.len() {
        xt.clear();
        xt.extend(x.row(t).iter().map(|v| v.wide()));
        score_into(blocks.as_ref(), &threads, &xt, model, config, &fresh, &mut prior, &mut scored);
        max_candidates = max_candidates.max(scored.len());
        let mut best = 0;
        let mut best_score = log_prob + scored[0].log_prob;
        for (i, c) in scored.iter().enumerate().skip(1) {
            let score = log_prob + c.log_prob;
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        let k = scored[best].speaker;
        if k > threads.len() {
            threads.push(fresh.clone());
        }
        threads[k - 1].observe(&model.net, &xt);
        match &mut blocks {
            Some(b) => b.advance(k)?,
            None => blocks = Some(BlockCounts::first()),
        }
        labels.push(k);
        log_prob = best_score;
    }
    Ok(Decoded {
        labels: LabelSequence::new(labels)?,
        log_prob,
        max_candidates_per_step: max_candidates,
    })
}

/// Beam search keeping the `beam_width` best hypotheses after every step.
pub fn decode_beam<S: Scalar>(x: &EmbeddingSequence<S>, model: &ModelParams<S>, config: &DecodeConfig) -> Result<Decoded> {
    Ok(beam_search(x, model, config)?.0)
}

/// Beam search returning the final beam as well, best first.
pub fn beam_search<S: Scalar>(x: &EmbeddingSequence<S>, model: &ModelParams<S>, config: &DecodeConfig) -> Result<(Decoded, Vec<Hypothesis>)> {
    check_input(x, model, config)?;
    let fresh = SpeakerThread::fresh(&model.net);
    let mut beam = vec![Hypothesis::empty()];
    let mut prior = Vec::new();
    let mut scored = Vec::new();
    let mut max_candidates = 0;
    for t in 0..x.len() {
        let xt = x.row_f64(t);
        let mut expansions: Vec<(f64, usize, StepCandidate)> = Vec::new();
        for (parent, hyp) in beam.iter().enumerate() {
            score_into(hyp.blocks.as_ref(), &hyp.threads, &xt, model, config, &fresh, &mut prior, &mut scored);
            max_candidates = max_candidates.max(scored.len());
            expansions.extend(scored.iter().map(|c| (hyp.log_prob + c.log_prob, parent, *c)));
        }
        // Stable: equal scores keep parent rank, then candidate order.
        expansions.sort_by(|a, b| b.0.total_cmp(&a.0));
        expansions.truncate(config.beam_width);
        let mut next: Vec<Hypothesis> = expansions
            .iter()
            .map(|(score, parent, c)| {
                let mut h = beam[*parent].extend(c, &xt, model, &fresh);
                h.log_prob = *score;
                h
            })
            .collect();
        if config.look_ahead > 0 && t >= config.look_ahead {
            let pos = t - config.look_ahead;
            let committed = next[0].labels[pos];
            next.retain(|h| h.labels[pos] == committed);
        }
        beam = next;
    }
    let best = &beam[0];
    let decoded = Decoded {
        labels: LabelSequence::new(best.labels.clone())?,
        log_prob: best.log_prob,
        max_candidates_per_step: max_candidates,
    };
    Ok((decoded, beam))
}

/// Dispatches on beam width.
pub fn decode<S: Scalar>(x: &EmbeddingSequence<S>, model: &ModelParams<S>, config: &DecodeConfig) -> Result<Decoded> {
    if config.beam_width == 1 && config.look_ahead == 0 {
        decode_greedy(x, model, config)
    } else {
        decode_beam(x, model, config)
    }
}

/// Decodes many utterances on `workers` threads; results keep input order.
pub fn decode_all<S: Scalar>(
    utterances: &[&EmbeddingSequence<S>],
    model: &ModelParams<S>,
    config: &DecodeConfig,
    workers: usize,
) -> Result<Vec<Decoded>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| utterances.par_iter().map(|x| decode(x, model, config)).collect())
}

/// Every order-of-appearance label sequence of length `len`, in candidate
/// order (continuation first, then ascending existing ids, then new).
pub fn enumerate_label_sequences(len: usize) -> Vec<LabelSequence> {
    fn recurse(prefix: &mut Vec<usize>, max: usize, len: usize, out: &mut Vec<LabelSequence>) {
        if prefix.len() == len {
            out.push(LabelSequence::new(prefix.clone()).expect("canonical by construction"));
            return;
        }
        let last = *prefix.last().expect("nonempty prefix");
        let order = std::iter::once(last).chain((1..=max).filter(|&k| k != last)).chain(std::iter::once(max + 1));
        for k in order.collect::<Vec<_>>() {
            prefix.push(k);
            recurse(prefix, max.max(k), len, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if len > 0 {
        recurse(&mut vec![1], 1, len, &mut out);
    }
    out
}

/// Exact MAP labelling by enumeration; only feasible for short inputs.
pub fn exhaustive_decode<S: Scalar>(x: &EmbeddingSequence<S>, model: &ModelParams<S>) -> Result<(LabelSequence, f64)> {
    if x.len() > ORACLE_MAX_LEN {
        return Err(Error::OracleGuard {
            max: ORACLE_MAX_LEN,
            got: x.len(),
        });
    }
    check_input(x, model, &DecodeConfig::greedy())?;
    let mut best: Option<(LabelSequence, f64)> = None;
    for y in enumerate_label_sequences(x.len()) {
        let score = joint_log_prob(x, &y, model)?.total();
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((y, score));
        }
    }
    Ok(best.expect("at least one labelling"))
}
