//! Full model parameters and the joint log-probability of a labelled
//! utterance.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingSequence, LabelSequence};
use crate::error::Result;
use crate::net::{forward_log_likelihood, EmissionParams, NetDims, NetParams};
use crate::prior::{change_log_likelihood, sequence_assignment_log_prob, PriorParams};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ModelParams<S> {
    pub net: NetParams<S>,
    pub emission: EmissionParams,
    pub prior: PriorParams,
}

impl<S: Scalar> ModelParams<S> {
    pub fn new(net: NetParams<S>, emission: EmissionParams, prior: PriorParams) -> Result<Self> {
        let model = ModelParams { net, emission, prior };
        model.validate()?;
        Ok(model)
    }

    /// Randomly initialised network with the given hyperparameters.
    pub fn random<R: Rng + ?Sized>(dims: NetDims, sigma2: f64, prior: PriorParams, rng: &mut R) -> Result<Self> {
        Self::new(NetParams::init(dims, rng), EmissionParams::from_sigma2(sigma2)?, prior)
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.prior.validate()?;
        EmissionParams::from_sigma2(self.sigma2())?;
        Ok(())
    }

    pub fn dims(&self) -> NetDims {
        self.net.dims()
    }

    pub fn sigma2(&self) -> f64 {
        self.emission.sigma2()
    }

    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        ModelParams {
            net: self.net.cast(),
            emission: self.emission,
            prior: self.prior,
        }
    }
}

/// Terms of `ln p(X, Y, Z)` for one utterance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointLogProb {
    pub change: f64,
    pub assignment: f64,
    pub emission: f64,
}

impl JointLogProb {
    pub fn total(&self) -> f64 {
        self.change + self.assignment + self.emission
    }
}

/// Scores a labelled utterance under the full generative model, using the
/// closed-form assignment prior.
pub fn joint_log_prob<S: Scalar>(x: &EmbeddingSequence<S>, y: &LabelSequence, model: &ModelParams<S>) -> Result<JointLogProb> {
    let z = y.change_indicators();
    Ok(JointLogProb {
        change: change_log_likelihood(&z, model.prior.p0)?,
        assignment: sequence_assignment_log_prob(y, &z, model.prior.alpha)?,
        emission: forward_log_likelihood(x, y, &model.net, &model.emission)?.log_likelihood,
    })
}
