//! Multimodal sequence association.
//!
//! Two recurrent transcribers (one per modality) are trained from
//! unsegmented feature sequences without a pre-assigned class coding: the
//! mapping between semantic concepts and output channels is itself learned
//! through an EM-style binding step, the two time axes are aligned with
//! dynamic time warping, and the per-frame training targets of both
//! modalities are fused with an element-wise max over the channels of the
//! concepts they share. The crate also ships a synthetic paired-sequence
//! generator, evaluation metrics, a training orchestrator and checkpointing.

mod error;

pub mod align;
pub mod binding;
pub mod checkpoint;
pub mod ctc;
pub mod datagen;
pub mod fusion;
pub mod lstm;
pub mod matrix;
pub mod metrics;
pub mod mmt;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::{logsumexp, softmax_rows, Matrix};
pub use rng::Rng;
