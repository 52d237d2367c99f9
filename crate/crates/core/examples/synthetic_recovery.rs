//! Samples a corpus from a random generator, trains a fresh model on it and
//! reports held-out likelihood and decoding error.
//!
//! usage: synthetic_recovery [gain] [sigma2] [step] [iterations] [batch] [seed] [clip]

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uisrnn::decode::{decode_greedy, DecodeConfig};
use uisrnn::metrics::label_error_rate;
use uisrnn::net::{forward_log_likelihood, NetDims, NetParams};
use uisrnn::sample::sample_corpus;
use uisrnn::train::{initial_model, train_from, TrainConfig};
use uisrnn::{EmissionParams, Model, PriorParams, Utterance};

fn held_out_ll(model: &Model, data: &[Utterance<f64>]) -> f64 {
    data.iter()
        .map(|u| forward_log_likelihood(&u.embeddings, &u.labels, &model.net, &model.emission).unwrap().log_likelihood)
        .sum::<f64>()
        / data.len() as f64
}

fn label_error(model: &Model, data: &[Utterance<f64>]) -> f64 {
    data.iter()
        .map(|u| {
            let d = decode_greedy(&u.embeddings, model, &DecodeConfig::greedy()).unwrap();
            label_error_rate(&u.labels, &d.labels).unwrap()
        })
        .sum::<f64>()
        / data.len() as f64
}

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let arg = |i: usize, d: f64| args.get(i).copied().unwrap_or(d);
    let (gain, sigma2, step, iterations, batch, seed) =
        (arg(0, 3.0), arg(1, 0.05), arg(2, 1e-5), arg(3, 500.0) as usize, arg(4, 10.0) as usize, arg(5, 1.0) as u64);
    let dims = NetDims { input: 8, hidden: 16, fc: 16 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generator = Model::new(
        NetParams::init_scaled(dims, gain, &mut rng),
        EmissionParams::from_sigma2(sigma2).unwrap(),
        PriorParams::new(0.8, 1.0).unwrap(),
    )
    .unwrap();
    let data = sample_corpus(&generator, 600, 50, seed + 1).unwrap();
    let (train_set, held_out) = data.split_at(500);
    let speakers: f64 = held_out.iter().map(|u| u.labels.num_speakers() as f64).sum::<f64>() / 100.0;
    println!("mean speakers per held-out utterance {speakers:.2}");
    println!("generator: held-out ll {:.3} label error {:.4}", held_out_ll(&generator, held_out), label_error(&generator, held_out));

    let clip = arg(6, 0.0);
    let config = TrainConfig { grad_clip_norm: (clip > 0.0).then_some(clip), step_size: step, batch_size: batch, max_iterations: iterations, seed, convergence_tol: 0.0, ..Default::default() };
    let init = initial_model(train_set, &config).unwrap();
    println!("init: held-out ll {:.3} label error {:.4} sigma2 {:.4}", held_out_ll(&init, held_out), label_error(&init, held_out), init.sigma2());
    let start = Instant::now();
    let (trained, report) = train_from(init, train_set, &config).unwrap();
    println!("trained in {:.1}s; p0 {:.4}", start.elapsed().as_secs_f64(), trained.prior.p0);
    for r in report.records.iter().step_by((iterations / 10).max(1)) {
        println!("  iter {} objective {:.1} alpha {:.4} sigma2 {:.5}", r.iteration, r.objective, r.alpha, r.sigma2);
    }
    println!("trained: held-out ll {:.3} label error {:.4} sigma2 {:.4}", held_out_ll(&trained, held_out), label_error(&trained, held_out), trained.sigma2());
}
