//! Projection head and its training.
//!
//! Representations `h` come from an external encoder (see [`encoder`]); the
//! head `g` maps them to unit embeddings `z = g(h)` where the contrastive loss
//! acts. All arithmetic is `f64` so finite-difference checks are meaningful.

pub mod encoder;
mod head;
mod loss;
mod schedule;
mod train;

pub use encoder::{PatchEncoder, ReferenceEncoder, RepresentationProvider};
pub use head::{embed_all, embed_all_with, HeadCache, HeadGrads, HeadParams, NORM_EPS};
pub use loss::{batch_triplet_loss, supcon_loss, supcon_loss_with, triplet_loss, LossOutput, TripletGrads};
pub use schedule::cosine_lr;
pub use train::{epoch_batches, train, EpochRecord, LossKind, RngState, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("empty {0} set")]
    EmptySet(&'static str),
}
