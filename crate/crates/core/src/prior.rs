//! Label prior: constant-rate speaker changes and the block-count ddCRP
//! speaker assignment.

use serde::{Deserialize, Serialize};

use crate::data::{BlockCounts, ChangeIndicators, LabelSequence};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    /// Probability of *no* speaker change between consecutive segments.
    pub p0: f64,
    /// CRP concentration; weight of opening a new speaker.
    pub alpha: f64,
}

impl PriorParams {
    pub fn new(p0: f64, alpha: f64) -> Result<Self> {
        let params = PriorParams { p0, alpha };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_p0(self.p0)?;
        check_alpha(self.alpha)
    }
}

fn check_p0(p0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidParameter(format!("p0 must lie in [0, 1], got {p0}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// `ln p(z_t | p0)`; `-inf` for an impossible event.
pub fn change_log_prob(changed: bool, p0: f64) -> Result<f64> {
    check_p0(p0)?;
    Ok(if changed { (1.0 - p0).ln() } else { p0.ln() })
}

/// Sum of `ln p(z_t | p0)` over a sequence.
pub fn change_log_likelihood(z: &ChangeIndicators, p0: f64) -> Result<f64> {
    let changes = z.num_changes() as f64;
    let stays = (z.len() - z.num_changes()) as f64;
    check_p0(p0)?;
    // 0 · ln 0 counts as 0 here: an event that never occurs costs nothing.
    let term = |n: f64, p: f64| if n == 0.0 { 0.0 } else { n * p.ln() };
    Ok(term(stays, p0) + term(changes, 1.0 - p0))
}

/// One option for the next label given the prefix state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub speaker: usize,
    pub changed: bool,
    pub log_prior: f64,
}

/// All options for `y_t` with their joint change/assignment log-prior, in
/// tie-break order: continuation, existing speakers by ascending id, then the
/// new speaker.
pub fn assignment_candidates(state: &BlockCounts, params: &PriorParams) -> Vec<Candidate> {
    let mut out = Vec::with_capacity(state.num_speakers() + 1);
    push_candidates(state, params, &mut out);
    out
}

pub(crate) fn push_candidates(state: &BlockCounts, params: &PriorParams, out: &mut Vec<Candidate>) {
    let last = state.last_speaker();
    let log_change = (1.0 - params.p0).ln();
    let log_norm = (state.switch_mass() as f64 + params.alpha).ln();
    out.push(Candidate {
        speaker: last,
        changed: false,
        log_prior: params.p0.ln(),
    });
    for (i, &n) in state.counts().iter().enumerate() {
        let speaker = i + 1;
        if speaker == last {
            continue;
        }
        out.push(Candidate {
            speaker,
            changed: true,
            log_prior: log_change + (n as f64).ln() - log_norm,
        });
    }
    out.push(Candidate {
        speaker: state.num_speakers() + 1,
        changed: true,
        log_prior: log_change + params.alpha.ln() - log_norm,
    });
}

/// Walks the prefix states of `labels`, yielding `(S_{t-1}, z_t)` for `t ≥ 2`.
fn switch_masses(labels: &LabelSequence) -> impl Iterator<Item = (usize, bool)> + '_ {
    let mut blocks = BlockCounts::first();
    labels.as_slice().windows(2).map(move |w| {
        let mass = blocks.switch_mass();
        blocks.advance(w[1]).expect("canonical labels");
        (mass, w[0] != w[1])
    })
}

/// `ln Γ(n)` for a positive integer, as `Σ_{k<n} ln k` (exact at 1 and 2).
pub fn ln_gamma_int(n: usize) -> f64 {
    (2..n).map(|k| (k as f64).ln()).sum()
}

/// `ln p(Y | Z, α)` in closed form.
pub fn sequence_assignment_log_prob(labels: &LabelSequence, z: &ChangeIndicators, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    z.check_consistent(labels)?;
    let blocks = labels.block_counts();
    let speakers = blocks.num_speakers() as f64;
    let numerator = (speakers - 1.0) * alpha.ln() + blocks.counts().iter().map(|&n| ln_gamma_int(n)).sum::<f64>();
    let denominator: f64 = switch_masses(labels)
        .filter(|&(_, changed)| changed)
        .map(|(mass, _)| (mass as f64 + alpha).ln())
        .sum();
    Ok(numerator - denominator)
}

/// `∂/∂α ln p(Y | Z, α)`.
pub fn grad_alpha(labels: &LabelSequence, z: &ChangeIndicators, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    z.check_consistent(labels)?;
    let speakers = labels.num_speakers() as f64;
    let denominator: f64 = switch_masses(labels)
        .filter(|&(_, changed)| changed)
        .map(|(mass, _)| 1.0 / (mass as f64 + alpha))
        .sum();
    Ok((speakers - 1.0) / alpha - denominator)
}

/// Closed-form maximum-likelihood `p0`: the fraction of transitions without a
/// speaker change.
pub fn estimate_p0<'a>(corpus: impl IntoIterator<Item = &'a LabelSequence>) -> Result<f64> {
    let (stays, transitions) = corpus.into_iter().fold((0usize, 0usize), |(s, n), labels| {
        let z = labels.change_indicators();
        (s + z.len() - z.num_changes(), n + z.len())
    });
    if transitions == 0 {
        return Err(Error::P0Undefined);
    }
    Ok(stays as f64 / transitions as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(v: &[usize]) -> LabelSequence {
        LabelSequence::new(v.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn change_log_prob_examples() {
        assert!(close(change_log_prob(false, 0.5).unwrap(), -std::f64::consts::LN_2, 1e-12));
        assert_eq!(change_log_prob(true, 1.0).unwrap(), f64::NEG_INFINITY);
        assert!(close(change_log_prob(false, 0.4).unwrap(), -0.916291, 1e-6));
        assert!(change_log_prob(false, 1.5).is_err());
        assert!(change_log_prob(true, -0.1).is_err());
    }

    #[test]
    fn four_options_after_worked_prefix() {
        let state = labels(&[1, 1, 2, 3, 2, 2]).block_counts();
        let params = PriorParams::new(0.5, 1.0).unwrap();
        let c = assignment_candidates(&state, &params);
        let got: Vec<(usize, bool)> = c.iter().map(|c| (c.speaker, c.changed)).collect();
        assert_eq!(got, vec![(2, false), (1, true), (3, true), (4, true)]);
        assert!(close(c[0].log_prior, -std::f64::consts::LN_2, 1e-12));
        assert!(close(c[1].log_prior, -1.791759, 1e-6));
        assert!(close(c[2].log_prior, -1.791759, 1e-6));
        assert!(close(c[3].log_prior, -1.791759, 1e-6));
        let total: f64 = c.iter().map(|c| c.log_prior.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_speaker_change_forces_new_speaker() {
        let params = PriorParams::new(0.3, 2.5).unwrap();
        let c = assignment_candidates(&BlockCounts::first(), &params);
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].speaker, 2);
        assert!(close(c[1].log_prior, 0.7f64.ln(), 1e-15));
    }

    #[test]
    fn assignment_log_prob_examples() {
        let y = labels(&[1, 1, 2, 3, 2, 2]);
        let lp = sequence_assignment_log_prob(&y, &y.change_indicators(), 1.0).unwrap();
        assert!(close(lp, (1.0f64 / 6.0).ln(), 1e-12));
        let y = labels(&[1, 1, 1]);
        assert_eq!(sequence_assignment_log_prob(&y, &y.change_indicators(), 3.7).unwrap(), 0.0);
        let y = labels(&[1, 2]);
        assert!(sequence_assignment_log_prob(&y, &y.change_indicators(), 2.0).unwrap().abs() < 1e-15);
        let wrong = ChangeIndicators::new(vec![false]);
        assert!(matches!(
            sequence_assignment_log_prob(&y, &wrong, 2.0),
            Err(Error::InconsistentIndicators)
        ));
    }

    #[test]
    fn grad_alpha_examples() {
        let y = labels(&[1, 1, 2, 3, 2, 2]);
        assert!(close(grad_alpha(&y, &y.change_indicators(), 1.0).unwrap(), 1.0 / 6.0, 1e-12));
        let y = labels(&[1, 1, 1]);
        assert_eq!(grad_alpha(&y, &y.change_indicators(), 5.0).unwrap(), 0.0);
        let y = labels(&[1, 2, 1]);
        assert!(close(grad_alpha(&y, &y.change_indicators(), 2.0).unwrap(), -1.0 / 3.0, 1e-12));
        assert!(grad_alpha(&y, &y.change_indicators(), 0.0).is_err());
        assert!(grad_alpha(&y, &y.change_indicators(), -1.0).is_err());
    }

    #[test]
    fn estimate_p0_examples() {
        assert_eq!(estimate_p0(&[labels(&[1, 1, 2, 3, 2, 2])]).unwrap(), 0.4);
        assert_eq!(estimate_p0(&[labels(&[1, 1, 1]), labels(&[1, 1])]).unwrap(), 1.0);
        assert_eq!(estimate_p0(&[labels(&[1, 2, 1, 2])]).unwrap(), 0.0);
        assert!(matches!(estimate_p0(&[labels(&[1]), labels(&[1])]), Err(Error::P0Undefined)));
    }

    #[test]
    fn ln_gamma_int_matches_factorials() {
        assert_eq!(ln_gamma_int(1), 0.0);
        assert_eq!(ln_gamma_int(2), 0.0);
        assert!((ln_gamma_int(5) - 24f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn change_log_likelihood_handles_degenerate_p0() {
        let y = labels(&[1, 1, 1]);
        assert_eq!(change_log_likelihood(&y.change_indicators(), 1.0).unwrap(), 0.0);
        let y = labels(&[1, 2]);
        assert_eq!(change_log_likelihood(&y.change_indicators(), 1.0).unwrap(), f64::NEG_INFINITY);
    }

    fn canonical(raw: Vec<u8>) -> LabelSequence {
        LabelSequence::canonicalize(&raw).unwrap()
    }

    proptest! {
        #[test]
        fn candidates_normalise(raw in prop::collection::vec(0u8..6, 1..40), p0 in 0.0f64..=1.0, alpha in 0.01f64..20.0) {
            let state = canonical(raw).block_counts();
            let params = PriorParams::new(p0, alpha).unwrap();
            let total: f64 = assignment_candidates(&state, &params).iter().map(|c| c.log_prior.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn grad_alpha_matches_finite_difference(raw in prop::collection::vec(0u8..4, 2..20), alpha in 0.1f64..10.0) {
            let y = canonical(raw);
            let z = y.change_indicators();
            let h = 1e-6;
            let fd = (sequence_assignment_log_prob(&y, &z, alpha + h).unwrap()
                - sequence_assignment_log_prob(&y, &z, alpha - h).unwrap()) / (2.0 * h);
            let g = grad_alpha(&y, &z, alpha).unwrap();
            prop_assert!((g - fd).abs() <= 1e-6 * g.abs().max(1e-2), "g={} fd={}", g, fd);
        }
    }
}
