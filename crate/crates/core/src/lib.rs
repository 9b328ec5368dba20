//! Distributed representations of code changes, learned by predicting the
//! words of the commit message from the diff.

pub mod compare;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod head;
pub mod model;
pub mod synth;
pub mod tasks;
pub mod tensor;
pub mod tensorize;
pub mod train;

pub use compare::{ComparisonFn, ComparisonMask};
pub use corpus::{LabelVector, PatchChange, Vocabulary};
pub use error::{Error, Result};
pub use head::PatchEmbedding;
pub use model::{Dims, Model, ModelConfig, ModelParams};
pub use tensor::{Parameters, Tensor};
pub use tensorize::{encode_change, ChangeTensor, ShapeConfig, Side};
pub use train::{load_checkpoint, save_checkpoint, Checkpoint, TrainConfig};
