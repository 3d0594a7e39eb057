//! Turning activated features into a full-resolution mask.

mod propagate;
mod refine;

pub use propagate::{propagate_labels, LabelPropagationDecoder};
pub use refine::{decode, RefinementDecoder};

use crate::encoder::{EncoderWeights, QueryEncoding};
use crate::error::Result;
use crate::frame::MaskMap;
use crate::pam::PixelMemory;
use crate::tensor::Tensor;

/// `H×W×1` foreground probabilities in `[0, 1]`.
pub type ProbMap = Tensor;
/// `H×W×1` unbounded foreground scores.
pub type MaskLogits = Tensor;

pub struct DecodeContext<'a> {
    pub query: &'a QueryEncoding,
    /// `[A × V_mem, V_query]` on the stride-16 grid.
    pub activated: &'a Tensor,
    pub memory: &'a PixelMemory,
    pub weights: &'a EncoderWeights,
}

pub trait MaskDecoder: Send + Sync {
    fn name(&self) -> &'static str;

    /// Per-pixel scores at frame resolution.
    fn scores(&self, ctx: &DecodeContext<'_>) -> Result<Tensor>;

    /// Foreground iff score ≥ threshold.
    fn threshold(&self) -> f32;

    fn decode(&self, ctx: &DecodeContext<'_>) -> Result<MaskMap> {
        binarize(&self.scores(ctx)?, self.threshold())
    }
}

/// Foreground where `score ≥ threshold`.
pub fn binarize(scores: &Tensor, threshold: f32) -> Result<MaskMap> {
    let (h, w, _) = scores.dims3()?;
    if scores.len() != h * w {
        return crate::error::dim_err(format!(
            "binarize needs one channel, got {:?}",
            scores.shape()
        ));
    }
    MaskMap::new(
        w,
        h,
        scores.data().iter().map(|&v| v >= threshold).collect(),
    )
}
