use std::sync::Arc;

use super::{
    check_divisible, check_mask_alignment, EncoderWeights, FeatureMode, FeaturePyramid,
    FrameEncoder, KeyMap, QueryEncoding, ValueMap,
};
use crate::error::{Error, Result};
use crate::frame::{Frame, MaskMap};
use crate::tensor::{avg_pool, Tensor};

pub const HANDCRAFTED_CHANNELS: usize = 8;
const CELL: usize = 16;

/// Per 16×16 cell: mean R, G, B; std R, G, B; mean |∂x| and |∂y| of luminance.
/// Each 8-vector is L2-normalised (all-zero vectors stay zero).
pub fn handcrafted_features(frame: &Frame) -> Result<Tensor> {
    let (h, w) = frame.extents();
    check_divisible(h, w, CELL)?;
    let (gh, gw) = (h / CELL, w / CELL);
    let rgb = frame.rgb();
    let px = |y: usize, x: usize, c: usize| rgb[(y * w + x) * 3 + c] as f32 / 255.0;
    let luma = |y: usize, x: usize| (px(y, x, 0) + px(y, x, 1) + px(y, x, 2)) / 3.0;

    let n = (CELL * CELL) as f32;
    let mut out = Vec::with_capacity(gh * gw * HANDCRAFTED_CHANNELS);
    for cy in 0..gh {
        for cx in 0..gw {
            let (y0, x0) = (cy * CELL, cx * CELL);
            let mut sum = [0.0f32; 3];
            let mut sq = [0.0f32; 3];
            for y in y0..y0 + CELL {
                for x in x0..x0 + CELL {
                    for c in 0..3 {
                        let v = px(y, x, c);
                        sum[c] += v;
                        sq[c] += v * v;
                    }
                }
            }
            let mean = sum.map(|s| s / n);
            let mut std = [0.0f32; 3];
            for c in 0..3 {
                std[c] = (sq[c] / n - mean[c] * mean[c]).max(0.0).sqrt();
            }
            // forward differences with both taps inside the cell
            let (mut gx, mut gy) = (0.0f32, 0.0f32);
            for y in y0..y0 + CELL {
                for x in x0..x0 + CELL - 1 {
                    gx += (luma(y, x + 1) - luma(y, x)).abs();
                }
            }
            for y in y0..y0 + CELL - 1 {
                for x in x0..x0 + CELL {
                    gy += (luma(y + 1, x) - luma(y, x)).abs();
                }
            }
            let pairs = (CELL * (CELL - 1)) as f32;
            let mut v = [
                mean[0],
                mean[1],
                mean[2],
                std[0],
                std[1],
                std[2],
                gx / pairs,
                gy / pairs,
            ];
            let norm = v.iter().map(|a| a * a).sum::<f32>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|a| *a /= norm);
            }
            out.extend_from_slice(&v);
        }
    }
    Tensor::new(vec![gh, gw, HANDCRAFTED_CHANNELS], out)
}

/// Training-free encoder: keys are scaled handcrafted features, reference
/// values are the mask's coverage of each 16×16 cell, query values are zero.
pub struct HandcraftedEncoder {
    weights: Arc<EncoderWeights>,
}

impl HandcraftedEncoder {
    pub fn new(weights: Arc<EncoderWeights>) -> Result<Self> {
        if weights.mode != FeatureMode::Handcrafted {
            return Err(Error::Mode(
                "handcrafted encoder needs handcrafted weights".into(),
            ));
        }
        Ok(Self { weights })
    }

    fn key_from(&self, features: &Tensor) -> KeyMap {
        let gain = self.weights.key_gain;
        features.clone().map(|v| v * gain)
    }
}

impl FrameEncoder for HandcraftedEncoder {
    fn name(&self) -> &'static str {
        "handcrafted"
    }

    fn weights(&self) -> &EncoderWeights {
        &self.weights
    }

    fn key_channels(&self) -> usize {
        HANDCRAFTED_CHANNELS
    }

    fn value_channels(&self) -> usize {
        1
    }

    fn encode_query(&self, frame: &Frame) -> Result<QueryEncoding> {
        let s16 = handcrafted_features(frame)?;
        let rgb = frame.to_tensor();
        let pyramid = FeaturePyramid {
            frame_extents: frame.extents(),
            s4: avg_pool(&rgb, 4)?,
            s8: avg_pool(&rgb, 8)?,
            s16,
        };
        let key = self.key_from(&pyramid.s16);
        let (gh, gw, _) = pyramid.s16.dims3()?;
        Ok(QueryEncoding {
            pyramid,
            key,
            value: Tensor::zeros(&[gh, gw, 1]),
        })
    }

    fn encode_reference(
        &self,
        pyramid: &FeaturePyramid,
        mask: &MaskMap,
    ) -> Result<(KeyMap, ValueMap)> {
        check_mask_alignment(pyramid, mask)?;
        let value = avg_pool(&mask.to_tensor(), CELL)?;
        Ok((self.key_from(&pyramid.s16), value))
    }
}
