//! Unbounded interleaved-state RNN: a supervised generative model for
//! segmenting and clustering sequences of speaker embeddings.
//!
//! Labels follow a constant-rate speaker-change model and a block-count
//! Chinese restaurant process; embeddings come from one GRU per speaker with
//! shared weights, interleaved along the timeline. The crate provides
//! teacher-forced training with exact gradients, greedy and beam MAP
//! decoding, and a confusion-only diarization error rate.
//!
//! Storage precision is generic over [`Scalar`]; all arithmetic accumulates
//! in `f64`. The aliases below cover the common cases.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod data;
pub mod decode;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod net;
pub mod prior;
pub mod sample;
pub mod scalar;
pub mod train;

pub use data::{BlockCounts, ChangeIndicators, EmbeddingSequence, LabelSequence};
pub use decode::{decode_beam, decode_greedy, exhaustive_decode, DecodeConfig, Decoded};
pub use error::{Error, Result};
pub use metrics::{der, DerResult, Timeline};
pub use model::{joint_log_prob, ModelParams};
pub use net::{EmissionParams, NetDims, NetParams};
pub use prior::PriorParams;
pub use scalar::Scalar;
pub use train::{train, TrainConfig, TrainReport, Utterance};

/// Double-precision model.
pub type Model = ModelParams<f64>;
/// Single-precision storage; arithmetic still accumulates in `f64`.
pub type ModelF32 = ModelParams<f32>;
pub type Embeddings = EmbeddingSequence<f64>;
pub type EmbeddingsF32 = EmbeddingSequence<f32>;
pub type Network = NetParams<f64>;
pub type NetworkF32 = NetParams<f32>;
