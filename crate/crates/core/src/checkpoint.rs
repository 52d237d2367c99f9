//! Versioned JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_text, write_text};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::net::{EmissionParams, NetDims, NetParams, GRU_CONVENTION};
use crate::prior::PriorParams;
use crate::scalar::Scalar;
use crate::train::TrainConfig;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Checkpoint<S> {
    pub format_version: u32,
    pub scalar: String,
    pub dims: NetDims,
    pub gru_convention: String,
    pub net: NetParams<S>,
    pub log_sigma2: f64,
    pub alpha: f64,
    pub p0: f64,
    pub train_config: Option<TrainConfig>,
    pub seed: Option<u64>,
}

impl<S: Scalar> Checkpoint<S> {
    pub fn new(model: &ModelParams<S>, train_config: Option<&TrainConfig>) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            scalar: S::NAME.to_owned(),
            dims: model.dims(),
            gru_convention: GRU_CONVENTION.to_owned(),
            net: model.net.clone(),
            log_sigma2: model.emission.log_sigma2,
            alpha: model.prior.alpha,
            p0: model.prior.p0,
            train_config: train_config.cloned(),
            seed: train_config.map(|c| c.seed),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoints serialise");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_owned(),
            line,
            message,
        };
        let ckpt: Checkpoint<S> = serde_json::from_str(text).map_err(|e| err(e.line(), e.to_string()))?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(err(1, format!("unsupported checkpoint format version {}", ckpt.format_version)));
        }
        if ckpt.gru_convention != GRU_CONVENTION {
            return Err(err(1, format!("unknown GRU convention '{}'", ckpt.gru_convention)));
        }
        if ckpt.net.dims() != ckpt.dims {
            return Err(err(1, "weight shapes disagree with declared dims".into()));
        }
        ckpt.model().map_err(|e| err(1, e.to_string()))?;
        Ok(ckpt)
    }

    pub fn model(&self) -> Result<ModelParams<S>> {
        ModelParams::new(
            self.net.clone(),
            EmissionParams {
                log_sigma2: self.log_sigma2,
            },
            PriorParams::new(self.p0, self.alpha)?,
        )
    }
}

pub fn save_checkpoint<S: Scalar>(path: &Path, model: &ModelParams<S>, train_config: Option<&TrainConfig>) -> Result<()> {
    write_text(path, &Checkpoint::new(model, train_config).to_json())
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<Checkpoint<S>> {
    Checkpoint::from_json(&read_text(path)?, &path.display().to_string())
}
