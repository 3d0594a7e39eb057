//! Pixel-adaptive memory inference for one-shot video object segmentation.
//!
//! A sequence is processed frame by frame: the query frame is encoded, read
//! against a pixel-level key/value memory, decoded into a mask, and the
//! memory is extended with the least-represented pixels whenever enough of
//! the scene has changed since the last update.
//!
//! Encoders, decoders and trigger policies are trait objects looked up by
//! name in a [`StrategyRegistry`].

pub mod decoder;
pub mod encoder;
mod error;
pub mod evalkit;
pub mod frame;
pub mod pam;
pub mod pipeline;
pub mod registry;
mod snapshot;
pub mod tensor;

pub use error::{Error, Result};
pub use frame::{Frame, MaskMap};
pub use pipeline::{segment_sequence, RunReport, SequenceConfig, SequenceRunner};
pub use registry::StrategyRegistry;
pub use tensor::Tensor;
