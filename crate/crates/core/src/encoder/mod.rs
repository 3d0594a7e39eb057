//! Query encoding (pyramid + key/value maps) and reference encoding from a
//! buffered pyramid plus a mask.

mod handcrafted;
mod seeded;
mod weights;

pub use handcrafted::{handcrafted_features, HandcraftedEncoder, HANDCRAFTED_CHANNELS};
pub use seeded::SeededConvEncoder;
pub use weights::{ConvLayer, EncoderWeights, FeatureMode, Widths, DEFAULT_KEY_GAIN};

use crate::error::{dim_err, Result};
use crate::frame::{Frame, MaskMap};
use crate::tensor::Tensor;

/// `H/16 × W/16 × C_k`.
pub type KeyMap = Tensor;
/// `H/16 × W/16 × C_v`.
pub type ValueMap = Tensor;

/// Query features at strides 4, 8 and 16, buffered for reuse by the
/// reference encoder on the same frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    /// `(H, W)` of the frame that produced this pyramid.
    pub frame_extents: (usize, usize),
    pub s4: Tensor,
    pub s8: Tensor,
    pub s16: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryEncoding {
    pub pyramid: FeaturePyramid,
    pub key: KeyMap,
    pub value: ValueMap,
}

/// One interchangeable feature extractor.
pub trait FrameEncoder: Send + Sync {
    fn name(&self) -> &'static str;

    fn weights(&self) -> &EncoderWeights;

    fn key_channels(&self) -> usize;

    fn value_channels(&self) -> usize;

    fn encode_query(&self, frame: &Frame) -> Result<QueryEncoding>;

    /// Must not re-run the backbone: only the buffered pyramid and the mask
    /// are consumed.
    fn encode_reference(
        &self,
        pyramid: &FeaturePyramid,
        mask: &MaskMap,
    ) -> Result<(KeyMap, ValueMap)>;
}

pub(crate) fn check_divisible(h: usize, w: usize, by: usize) -> Result<()> {
    if h == 0 || w == 0 || !h.is_multiple_of(by) || !w.is_multiple_of(by) {
        return dim_err(format!(
            "frame extents {h}×{w} must be positive multiples of {by}"
        ));
    }
    Ok(())
}

pub(crate) fn check_mask_alignment(pyramid: &FeaturePyramid, mask: &MaskMap) -> Result<()> {
    if mask.extents() != pyramid.frame_extents {
        let (h, w) = pyramid.frame_extents;
        return dim_err(format!(
            "mask {}×{} does not match buffered frame {h}×{w}",
            mask.height(),
            mask.width()
        ));
    }
    Ok(())
}
