//! Maximum-likelihood training: closed-form `p0`, stochastic gradient ascent
//! on the network, `ln σ²` and `ln α`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingSequence, LabelSequence};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::net::{backward_gradients, EmissionParams, NetDims, NetParams};
use crate::prior::{change_log_likelihood, estimate_p0, grad_alpha, sequence_assignment_log_prob, PriorParams};
use crate::scalar::Scalar;

/// One labelled training sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance<S> {
    pub id: String,
    pub embeddings: EmbeddingSequence<S>,
    pub labels: LabelSequence,
}

impl<S: Scalar> Utterance<S> {
    pub fn new(id: impl Into<String>, embeddings: EmbeddingSequence<S>, labels: LabelSequence) -> Result<Self> {
        if embeddings.len() != labels.len() {
            return Err(Error::LengthMismatch {
                embeddings: embeddings.len(),
                labels: labels.len(),
            });
        }
        Ok(Utterance {
            id: id.into(),
            embeddings,
            labels,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub fc_dim: usize,
    /// Rectify the final output layer.
    pub rectify_output: bool,
    /// Constant step size `ρ`.
    pub step_size: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
    /// Relative change of the smoothed objective below which training stops.
    pub convergence_tol: f64,
    pub log_every: usize,
    /// Threads for per-utterance gradients.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 16,
            fc_dim: 16,
            rectify_output: false,
            step_size: 1e-5,
            batch_size: 10,
            max_iterations: 1000,
            grad_clip_norm: None,
            seed: 0,
            convergence_tol: 1e-6,
            log_every: 10,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, corpus_len: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return bad(format!("step size must be nonnegative, got {}", self.step_size));
        }
        if self.batch_size == 0 || self.batch_size > corpus_len {
            return bad(format!("batch size must lie in [1, {corpus_len}], got {}", self.batch_size));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        if self.hidden_dim == 0 || self.fc_dim == 0 {
            return bad("network dimensions must be positive".into());
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0) {
                return bad(format!("grad_clip_norm must be positive, got {c}"));
            }
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence_tol must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    Converged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Minibatch estimate of the corpus log joint likelihood (scaled by N/b),
    /// evaluated before the step.
    pub objective: f64,
    pub alpha: f64,
    pub sigma2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<IterationRecord>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub p0: f64,
    pub alpha: f64,
    pub sigma2: f64,
}

impl TrainReport {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Training log: one line per logged iteration, plus the final one.
    pub fn log_lines(&self, log_every: usize) -> Vec<String> {
        let every = log_every.max(1);
        let last = self.records.len();
        self.records
            .iter()
            .filter(|r| r.iteration % every == 0 || r.iteration == last)
            .map(|r| {
                format!(
                    "iter={} objective={} alpha={} sigma2={} p0={}",
                    r.iteration, r.objective, r.alpha, r.sigma2, self.p0
                )
            })
            .collect()
    }
}

/// Gradient of the per-batch objective with respect to every trained quantity.
#[derive(Clone, Debug)]
pub struct BatchGradient {
    pub net: NetParams<f64>,
    pub log_sigma2: f64,
    /// Gradient with respect to `ln α`.
    pub log_alpha: f64,
    /// Unscaled sum of per-utterance log joint likelihoods.
    pub log_joint: f64,
}

impl BatchGradient {
    fn zeros(dims: NetDims) -> Self {
        BatchGradient {
            net: NetParams::zeros(dims),
            log_sigma2: 0.0,
            log_alpha: 0.0,
            log_joint: 0.0,
        }
    }

    fn add(&mut self, other: &BatchGradient) {
        for (a, b) in self.net.tensors_mut().into_iter().zip(other.net.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.log_sigma2 += other.log_sigma2;
        self.log_alpha += other.log_alpha;
        self.log_joint += other.log_joint;
    }

    pub fn norm(&self) -> f64 {
        let net: f64 = self.net.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum();
        (net + self.log_sigma2 * self.log_sigma2 + self.log_alpha * self.log_alpha).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.log_sigma2.is_finite()
            && self.log_alpha.is_finite()
            && self.net.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn scale(&mut self, factor: f64) {
        for t in self.net.tensors_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
        self.log_sigma2 *= factor;
        self.log_alpha *= factor;
    }
}

/// Gradient and log joint likelihood of one utterance.
///
/// The network and `ln σ²` see only the emission term; `ln α` sees only the
/// assignment term. The change term enters the objective value but has no
/// trained parameter.
pub fn utterance_gradient<S: Scalar>(utt: &Utterance<S>, model: &ModelParams<S>) -> Result<BatchGradient> {
    let emission = backward_gradients(&utt.embeddings, &utt.labels, &model.net, &model.emission)?;
    let z = utt.labels.change_indicators();
    let alpha = model.prior.alpha;
    let assignment = sequence_assignment_log_prob(&utt.labels, &z, alpha)?;
    let change = change_log_likelihood(&z, model.prior.p0)?;
    let out = BatchGradient {
        net: emission.net,
        log_sigma2: emission.log_sigma2,
        log_alpha: alpha * grad_alpha(&utt.labels, &z, alpha)?,
        log_joint: emission.log_likelihood + assignment + change,
    };
    if !out.is_finite() {
        return Err(Error::NonFiniteGradient { utterance: utt.id.clone() });
    }
    Ok(out)
}

/// Sums per-utterance gradients in batch order.
pub fn batch_gradient<S: Scalar>(batch: &[&Utterance<S>], model: &ModelParams<S>, workers: usize) -> Result<BatchGradient> {
    let parts: Vec<BatchGradient> = if workers <= 1 {
        batch.iter().map(|u| utterance_gradient(u, model)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| batch.par_iter().map(|u| utterance_gradient(u, model)).collect::<Result<_>>())?
    };
    let mut total = BatchGradient::zeros(model.dims());
    total.net.rectify_output = model.net.rectify_output;
    for p in &parts {
        total.add(p);
    }
    Ok(total)
}

/// Applies one ascent step `θ ← θ + ρ · scale · Σ ∇` with optional global
/// norm clipping of the scaled gradient. Returns the scaled objective
/// estimate at the pre-step parameters.
pub fn minibatch_step<S: Scalar>(
    model: &mut ModelParams<S>,
    batch: &[&Utterance<S>],
    scale: f64,
    config: &TrainConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty minibatch".into()));
    }
    let mut grad = batch_gradient(batch, model, config.workers)?;
    let objective = scale * grad.log_joint;
    grad.scale(scale);
    if let Some(max_norm) = config.grad_clip_norm {
        let norm = grad.norm();
        if norm > max_norm {
            grad.scale(max_norm / norm);
        }
    }
    let rho = config.step_size;
    for (param, g) in model.net.tensors_mut().into_iter().zip(grad.net.tensors()) {
        for (p, gv) in param.iter_mut().zip(g) {
            *p = S::of(p.wide() + rho * gv);
        }
    }
    model.emission.log_sigma2 += rho * grad.log_sigma2;
    model.prior.alpha = (model.prior.alpha.ln() + rho * grad.log_alpha).exp();
    Ok(objective)
}

/// Variance of all embedding coordinates in the corpus.
pub fn empirical_variance<S: Scalar>(corpus: &[Utterance<S>]) -> f64 {
    let (mut n, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
    for utt in corpus {
        for row in utt.embeddings.rows() {
            for v in row {
                n += 1.0;
                let v = v.wide();
                let delta = v - mean;
                mean += delta / n;
                m2 += delta * (v - mean);
            }
        }
    }
    if n > 0.0 {
        m2 / n
    } else {
        0.0
    }
}

fn check_corpus<S: Scalar>(corpus: &[Utterance<S>]) -> Result<usize> {
    let first = corpus.first().ok_or(Error::EmptySequence)?;
    let dim = first.embeddings.dim();
    for utt in corpus {
        if utt.embeddings.dim() != dim {
            return Err(Error::DimensionMismatch {
                what: "corpus embedding dimension",
                expected: dim,
                got: utt.embeddings.dim(),
            });
        }
        if utt.embeddings.len() != utt.labels.len() {
            return Err(Error::LengthMismatch {
                embeddings: utt.embeddings.len(),
                labels: utt.labels.len(),
            });
        }
    }
    Ok(dim)
}

/// Fresh model for `corpus`: seeded network, `σ²` at the empirical variance,
/// `α = 1`, and the closed-form `p0`.
pub fn initial_model<S: Scalar>(corpus: &[Utterance<S>], config: &TrainConfig) -> Result<ModelParams<S>> {
    let dim = check_corpus(corpus)?;
    config.validate(corpus.len())?;
    let p0 = estimate_p0(corpus.iter().map(|u| &u.labels))?;
    let dims = NetDims {
        input: dim,
        hidden: config.hidden_dim,
        fc: config.fc_dim,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = NetParams::init(dims, &mut rng);
    net.rectify_output = config.rectify_output;
    let variance = empirical_variance(corpus);
    let sigma2 = if variance > 0.0 { variance } else { 1.0 };
    ModelParams::new(net, EmissionParams::from_sigma2(sigma2)?, PriorParams::new(p0, 1.0)?)
}

/// Trains a fresh model; see [`train_from`].
pub fn train<S: Scalar>(corpus: &[Utterance<S>], config: &TrainConfig) -> Result<(ModelParams<S>, TrainReport)> {
    let model = initial_model(corpus, config)?;
    train_from(model, corpus, config)
}

/// Runs minibatch ascent from `model`. `p0` is reset to its closed form and
/// then held fixed.
pub fn train_from<S: Scalar>(
    mut model: ModelParams<S>,
    corpus: &[Utterance<S>],
    config: &TrainConfig,
) -> Result<(ModelParams<S>, TrainReport)> {
    let dim = check_corpus(corpus)?;
    if dim != model.dims().input {
        return Err(Error::DimensionMismatch {
            what: "corpus embedding dimension",
            expected: model.dims().input,
            got: dim,
        });
    }
    config.validate(corpus.len())?;
    model.prior.p0 = estimate_p0(corpus.iter().map(|u| &u.labels))?;

    // Separate stream from initialisation so that both stay reproducible.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c_u64);
    let n = corpus.len();
    let window = n.div_ceil(config.batch_size);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut records = Vec::with_capacity(config.max_iterations);
    let mut stop_reason = StopReason::MaxIterations;

    for iteration in 1..=config.max_iterations {
        if cursor >= n {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + config.batch_size).min(n);
        let batch: Vec<&Utterance<S>> = order[cursor..end].iter().map(|&i| &corpus[i]).collect();
        cursor = end;
        let scale = n as f64 / batch.len() as f64;
        let objective = minibatch_step(&mut model, &batch, scale, config)?;
        records.push(IterationRecord {
            iteration,
            objective,
            alpha: model.prior.alpha,
            sigma2: model.sigma2(),
        });
        if converged(&records, window, config.convergence_tol) {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let report = TrainReport {
        iterations: records.len(),
        records,
        stop_reason,
        p0: model.prior.p0,
        alpha: model.prior.alpha,
        sigma2: model.sigma2(),
    };
    Ok((model, report))
}

/// Compares the mean objective of the last `window` iterations with the
/// window before it.
fn converged(records: &[IterationRecord], window: usize, tol: f64) -> bool {
    if tol <= 0.0 || records.len() < 2 * window {
        return false;
    }
    let mean = |r: &[IterationRecord]| r.iter().map(|x| x.objective).sum::<f64>() / r.len() as f64;
    let len = records.len();
    let recent = mean(&records[len - window..]);
    let previous = mean(&records[len - 2 * window..len - window]);
    (recent - previous).abs() <= tol * previous.abs().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_corpus() -> Vec<Utterance<f64>> {
        let labels = LabelSequence::new(vec![1, 1, 2, 3, 2, 2]).unwrap();
        let rows = vec![vec![0.1, -0.2], vec![0.3, 0.1], vec![-0.4, 0.9], vec![1.1, 0.0], vec![-0.3, 0.8], vec![-0.5, 1.0]];
        vec![Utterance::new("u0", EmbeddingSequence::from_rows(rows).unwrap(), labels).unwrap()]
    }

    fn config() -> TrainConfig {
        TrainConfig {
            hidden_dim: 3,
            fc_dim: 3,
            batch_size: 1,
            max_iterations: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_step_size_changes_nothing_but_p0() {
        let corpus = tiny_corpus();
        let cfg = TrainConfig { step_size: 0.0, ..config() };
        let init = initial_model(&corpus, &cfg).unwrap();
        let (trained, report) = train(&corpus, &cfg).unwrap();
        assert_eq!(trained, init);
        assert_eq!(report.p0, 0.4);
        assert_eq!(report.iterations, report.records.len());
    }

    #[test]
    fn p0_is_closed_form_regardless_of_step_size() {
        let corpus = tiny_corpus();
        for rho in [0.0, 1e-3, 1e-1] {
            let (m, _) = train(&corpus, &TrainConfig { step_size: rho, ..config() }).unwrap();
            assert_eq!(m.prior.p0, 0.4);
        }
    }

    #[test]
    fn alpha_step_in_log_space() {
        let corpus = tiny_corpus();
        let cfg = TrainConfig { step_size: 0.1, ..config() };
        let mut model = initial_model(&corpus, &cfg).unwrap();
        let batch: Vec<&Utterance<f64>> = corpus.iter().collect();
        minibatch_step(&mut model, &batch, 1.0, &cfg).unwrap();
        assert!((model.prior.alpha - (0.1f64 / 6.0).exp()).abs() < 1e-12);
        assert!((model.prior.alpha - 1.01681).abs() < 1e-5);
    }

    #[test]
    fn clipping_bounds_the_step() {
        let corpus = tiny_corpus();
        let cfg = TrainConfig { step_size: 1.0, grad_clip_norm: Some(1e-3), ..config() };
        let init = initial_model(&corpus, &cfg).unwrap();
        let mut model = init.clone();
        let batch: Vec<&Utterance<f64>> = corpus.iter().collect();
        minibatch_step(&mut model, &batch, 1.0, &cfg).unwrap();
        let mut sq = 0.0;
        for (a, b) in model.net.tensors().iter().zip(init.net.tensors()) {
            sq += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        }
        sq += (model.emission.log_sigma2 - init.emission.log_sigma2).powi(2);
        sq += (model.prior.alpha.ln() - init.prior.alpha.ln()).powi(2);
        assert!(sq.sqrt() <= 1e-3 * (1.0 + 1e-9));
    }

    #[test]
    fn invalid_inputs_fail_before_training() {
        let corpus = tiny_corpus();
        assert!(train::<f64>(&[], &config()).is_err());
        assert!(train(&corpus, &TrainConfig { batch_size: 2, ..config() }).is_err());
        assert!(train(&corpus, &TrainConfig { step_size: -1.0, ..config() }).is_err());
        let mut mixed = corpus.clone();
        mixed.push(Utterance::new("u1", EmbeddingSequence::from_rows(vec![vec![0.0; 3]]).unwrap(), LabelSequence::new(vec![1]).unwrap()).unwrap());
        assert!(matches!(train(&mixed, &TrainConfig { batch_size: 1, ..config() }), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn log_lines_follow_format() {
        let (_, report) = train(&tiny_corpus(), &TrainConfig { max_iterations: 3, log_every: 2, ..config() }).unwrap();
        let lines = report.log_lines(2);
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("iter=2 objective="));
        assert!(lines[1].starts_with("iter=3 "));
        assert!(lines[1].contains(" alpha=") && lines[1].contains(" sigma2=") && lines[1].ends_with(" p0=0.4"));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let corpus: Vec<Utterance<f64>> = (0..4)
            .map(|i| {
                let mut u = tiny_corpus().remove(0);
                u.id = format!("u{i}");
                u
            })
            .collect();
        let cfg = TrainConfig { batch_size: 4, step_size: 1e-3, ..config() };
        let (a, ra) = train(&corpus, &cfg).unwrap();
        let (b, rb) = train(&corpus, &TrainConfig { workers: 3, ..cfg }).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }
}
