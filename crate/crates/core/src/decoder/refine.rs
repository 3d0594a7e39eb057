use super::{DecodeContext, MaskDecoder, MaskLogits};
use crate::encoder::{EncoderWeights, FeaturePyramid};
use crate::error::{dim_err, Result};
use crate::tensor::{resize_bilinear, upsample_bilinear_x2, Tensor};

/// Three refinement stages from stride 16 back to frame resolution. Skip
/// features are projected by a 1×1 conv and added after each ×2 upsample.
pub fn decode(
    activated: &Tensor,
    pyramid: &FeaturePyramid,
    w: &EncoderWeights,
) -> Result<MaskLogits> {
    let (h16, w16, _) = activated.dims3()?;
    let (sh, sw, _) = pyramid.s16.dims3()?;
    if (h16, w16) != (sh, sw) {
        return dim_err(format!(
            "activated grid {h16}×{w16} vs pyramid s16 {sh}×{sw}"
        ));
    }
    let x = w.layer("dec.conv16")?.forward(activated, 1)?.relu();
    let x = upsample_bilinear_x2(&x)?.add(&w.layer("dec.skip8")?.forward(&pyramid.s8, 1)?)?;
    let x = w.layer("dec.conv8")?.forward(&x, 1)?.relu();
    let x = upsample_bilinear_x2(&x)?.add(&w.layer("dec.skip4")?.forward(&pyramid.s4, 1)?)?;
    let x = w.layer("dec.conv4")?.forward(&x, 1)?.relu();
    // the 1×1 head commutes with bilinear upsampling, so apply it first
    let logits = w.layer("dec.head")?.forward(&x, 1)?;
    let (fh, fw) = pyramid.frame_extents;
    resize_bilinear(&logits, fh, fw)
}

pub struct RefinementDecoder;

impl MaskDecoder for RefinementDecoder {
    fn name(&self) -> &'static str {
        "refine"
    }

    fn scores(&self, ctx: &DecodeContext<'_>) -> Result<Tensor> {
        decode(ctx.activated, &ctx.query.pyramid, ctx.weights)
    }

    fn threshold(&self) -> f32 {
        0.0
    }
}
