#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uisrnn::data::{EmbeddingSequence, LabelSequence};
use uisrnn::model::ModelParams;
use uisrnn::net::{NetDims, NetParams};
use uisrnn::prior::PriorParams;
use uisrnn::EmissionParams;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random canonical label sequence of length `len` with at most `max_speakers`.
pub fn random_labels<R: Rng>(rng: &mut R, len: usize, max_speakers: usize) -> LabelSequence {
    let mut labels = vec![1];
    let mut k = 1;
    for _ in 1..len {
        let next = rng.random_range(1..=(k + 1).min(max_speakers));
        k = k.max(next);
        labels.push(next);
    }
    LabelSequence::new(labels).unwrap()
}

pub fn random_embeddings<R: Rng>(rng: &mut R, len: usize, dim: usize, scale: f64) -> EmbeddingSequence<f64> {
    let rows = (0..len)
        .map(|_| (0..dim).map(|_| rng.random_range(-scale..scale)).collect())
        .collect();
    EmbeddingSequence::from_rows(rows).unwrap()
}

pub fn random_model<R: Rng>(rng: &mut R, dims: NetDims, gain: f64) -> ModelParams<f64> {
    let net = NetParams::init_scaled(dims, gain, rng);
    let sigma2 = rng.random_range(0.2..1.5);
    let p0 = rng.random_range(0.2..0.9);
    let alpha = rng.random_range(0.3..3.0);
    ModelParams::new(net, EmissionParams::from_sigma2(sigma2).unwrap(), PriorParams::new(p0, alpha).unwrap()).unwrap()
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;

fn agrees(analytic: f64, numeric: f64) -> bool {
    // Relative error with a floor so that entries that are zero up to
    // rounding compare on an absolute scale.
    (analytic - numeric).abs() <= FD_REL_TOL * analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Compares every analytic gradient entry (network tensors, `log σ²`, `α`)
/// with a central difference on one random instance. Returns a description
/// of each entry that disagrees.
pub fn gradient_mismatches(seed: u64, dims: NetDims, len: usize, max_speakers: usize, rectify: bool) -> Vec<String> {
    use uisrnn::net::{backward_gradients, forward_log_likelihood, TENSOR_NAMES};
    use uisrnn::prior::{grad_alpha, sequence_assignment_log_prob};

    let mut r = rng(seed);
    let mut model = random_model(&mut r, dims, 1.5);
    model.net.rectify_output = rectify;
    if rectify {
        // Keep outputs away from the rectifier kink.
        for b in model.net.fc2_b.iter_mut() {
            *b = 2.0;
        }
    }
    let x = random_embeddings(&mut r, len, dims.input, 1.0);
    let y = random_labels(&mut r, len, max_speakers);
    let g = backward_gradients(&x, &y, &model.net, &model.emission).unwrap();
    let ll = |m: &ModelParams<f64>| forward_log_likelihood(&x, &y, &m.net, &m.emission).unwrap().log_likelihood;
    let mut bad = Vec::new();

    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        for i in 0..model.net.tensors()[t].len() {
            let mut plus = model.clone();
            plus.net.tensors_mut()[t][i] += FD_STEP;
            let mut minus = model.clone();
            minus.net.tensors_mut()[t][i] -= FD_STEP;
            let fd = (ll(&plus) - ll(&minus)) / (2.0 * FD_STEP);
            let an = g.net.tensors()[t][i];
            if !agrees(an, fd) {
                bad.push(format!("seed {seed} {name}[{i}]: analytic {an} numeric {fd}"));
            }
        }
    }
    let mut plus = model.clone();
    plus.emission.log_sigma2 += FD_STEP;
    let mut minus = model.clone();
    minus.emission.log_sigma2 -= FD_STEP;
    let fd = (ll(&plus) - ll(&minus)) / (2.0 * FD_STEP);
    if !agrees(g.log_sigma2, fd) {
        bad.push(format!("seed {seed} log_sigma2: analytic {} numeric {fd}", g.log_sigma2));
    }

    let z = y.change_indicators();
    let a = model.prior.alpha;
    let fd = (sequence_assignment_log_prob(&y, &z, a + FD_STEP).unwrap()
        - sequence_assignment_log_prob(&y, &z, a - FD_STEP).unwrap())
        / (2.0 * FD_STEP);
    let an = grad_alpha(&y, &z, a).unwrap();
    if !agrees(an, fd) {
        bad.push(format!("seed {seed} alpha: analytic {an} numeric {fd}"));
    }
    bad
}
