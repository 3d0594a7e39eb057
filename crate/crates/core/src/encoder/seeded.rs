use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{
    check_divisible, check_mask_alignment, EncoderWeights, FeatureMode, FeaturePyramid,
    FrameEncoder, KeyMap, QueryEncoding, ValueMap,
};
use crate::error::{Error, Result};
use crate::frame::{Frame, MaskMap};
use crate::tensor::{concat_channels, space_to_depth, Tensor};

/// Strided-conv backbone with randomly initialised (seeded) weights, plus the
/// light-aggregation reference encoder.
pub struct SeededConvEncoder {
    weights: Arc<EncoderWeights>,
    backbone_calls: AtomicUsize,
}

impl SeededConvEncoder {
    pub fn new(weights: Arc<EncoderWeights>) -> Result<Self> {
        if weights.mode != FeatureMode::SeededConv {
            return Err(Error::Mode(
                "seeded-conv encoder needs seeded-conv weights".into(),
            ));
        }
        Ok(Self {
            weights,
            backbone_calls: AtomicUsize::new(0),
        })
    }

    /// Number of times the stem/stage convolutions have run.
    pub fn backbone_calls(&self) -> usize {
        self.backbone_calls.load(Ordering::Relaxed)
    }

    fn backbone(&self, frame: &Frame) -> Result<FeaturePyramid> {
        self.backbone_calls.fetch_add(1, Ordering::Relaxed);
        let w = &self.weights;
        let x = frame.to_tensor();
        let s2 = w.layer("stem")?.forward(&x, 2)?.relu();
        let s4 = w.layer("stage4")?.forward(&s2, 2)?.relu();
        let s8 = w.layer("stage8")?.forward(&s4, 2)?.relu();
        let s16 = w.layer("stage16")?.forward(&s8, 2)?.relu();
        Ok(FeaturePyramid {
            frame_extents: frame.extents(),
            s4,
            s8,
            s16,
        })
    }
}

impl FrameEncoder for SeededConvEncoder {
    fn name(&self) -> &'static str {
        "seeded"
    }

    fn weights(&self) -> &EncoderWeights {
        &self.weights
    }

    fn key_channels(&self) -> usize {
        self.weights.widths.key()
    }

    fn value_channels(&self) -> usize {
        self.weights.widths.value()
    }

    fn encode_query(&self, frame: &Frame) -> Result<QueryEncoding> {
        check_divisible(frame.height(), frame.width(), 16)?;
        let pyramid = self.backbone(frame)?;
        let key = self.weights.layer("query.key")?.forward(&pyramid.s16, 1)?;
        let value = self
            .weights
            .layer("query.value")?
            .forward(&pyramid.s16, 1)?;
        Ok(QueryEncoding {
            pyramid,
            key,
            value,
        })
    }

    fn encode_reference(
        &self,
        pyramid: &FeaturePyramid,
        mask: &MaskMap,
    ) -> Result<(KeyMap, ValueMap)> {
        check_mask_alignment(pyramid, mask)?;
        let w = &self.weights;
        // mask path: reversed sub-pixel down-sampling, fused with the
        // buffered feature of the same size at each scale
        let m4 = space_to_depth(&mask.to_tensor(), 4)?;
        let m4 = w.layer("lae.mask4")?.forward(&m4, 1)?.relu();
        let f4 = fuse(w, "lae.fuse4", &m4, &pyramid.s4)?;
        let f8 = fuse(w, "lae.fuse8", &space_to_depth(&f4, 2)?, &pyramid.s8)?;
        let f16 = fuse(w, "lae.fuse16", &space_to_depth(&f8, 2)?, &pyramid.s16)?;
        let key = w.layer("ref.key")?.forward(&f16, 1)?;
        let value = w.layer("ref.value")?.forward(&f16, 1)?;
        Ok((key, value))
    }
}

fn fuse(
    w: &EncoderWeights,
    layer: &str,
    mask_feat: &Tensor,
    image_feat: &Tensor,
) -> Result<Tensor> {
    let cat = concat_channels(&[mask_feat, image_feat])?;
    Ok(w.layer(layer)?.forward(&cat, 1)?.relu())
}
