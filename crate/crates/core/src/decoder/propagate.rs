use super::{DecodeContext, MaskDecoder, ProbMap};
use crate::encoder::KeyMap;
use crate::error::{Error, Result};
use crate::pam::{memory_read, PixelMemory};
use crate::tensor::{resize_bilinear, take_channels, Tensor};

const CELL: usize = 16;

fn require_label_memory(memory: &PixelMemory) -> Result<()> {
    if memory.value_channels() != 1 {
        return Err(Error::Mode(format!(
            "label propagation needs single-channel memory values, got {}",
            memory.value_channels()
        )));
    }
    Ok(())
}

fn upsample_probs(cells: &Tensor, h: usize, w: usize) -> Result<ProbMap> {
    Ok(resize_bilinear(cells, h, w)?.map(|v| v.clamp(0.0, 1.0)))
}

/// Affinity-weighted average of memory labels per cell, bilinearly
/// upsampled to `16·grid` resolution.
pub fn propagate_labels(query_key: &KeyMap, memory: &PixelMemory) -> Result<ProbMap> {
    require_label_memory(memory)?;
    let cells = memory_read(query_key, memory)?;
    let (gh, gw, _) = cells.dims3()?;
    upsample_probs(&cells, gh * CELL, gw * CELL)
}

/// Reads the label channel already computed by the memory match.
pub struct LabelPropagationDecoder;

impl MaskDecoder for LabelPropagationDecoder {
    fn name(&self) -> &'static str {
        "propagate"
    }

    fn scores(&self, ctx: &DecodeContext<'_>) -> Result<Tensor> {
        require_label_memory(ctx.memory)?;
        let labels = take_channels(ctx.activated, 0..1)?;
        let (h, w) = ctx.query.pyramid.frame_extents;
        upsample_probs(&labels, h, w)
    }

    fn threshold(&self) -> f32 {
        0.5
    }
}
