//! Variation-aware update triggering and the alternative schedules used for
//! ablation.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::frame::{Frame, MaskMap};
use crate::tensor::Tensor;

/// `H×W×1` per-pixel difference.
pub type DiffMap = Tensor;

/// Per pixel: Σ over RGB of |Δ| / 255, in `[0, 3]`.
pub fn frame_difference(current: &Frame, previous: &Frame) -> Result<DiffMap> {
    if current.extents() != previous.extents() {
        return dim_err(format!(
            "frame {:?} vs previous {:?}",
            current.extents(),
            previous.extents()
        ));
    }
    let data = current
        .rgb()
        .chunks_exact(3)
        .zip(previous.rgb().chunks_exact(3))
        .map(|(a, b)| {
            let total: u32 = a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y) as u32).sum();
            total as f32 / 255.0
        })
        .collect();
    let (h, w) = current.extents();
    Tensor::new(vec![h, w, 1], data)
}

/// Per pixel |Δ| of two binary masks, in `{0, 1}`.
pub fn mask_difference(current: &MaskMap, previous: &MaskMap) -> Result<DiffMap> {
    if current.extents() != previous.extents() {
        return dim_err(format!(
            "mask {:?} vs previous {:?}",
            current.extents(),
            previous.extents()
        ));
    }
    let data = current
        .bits()
        .iter()
        .zip(previous.bits())
        .map(|(a, b)| if a != b { 1.0 } else { 0.0 })
        .collect();
    let (h, w) = current.extents();
    Tensor::new(vec![h, w, 1], data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerThresholds {
    /// `th_f`, compared against the image difference.
    pub image: f32,
    /// `th_m`, compared against the mask difference.
    pub mask: f32,
    /// `P_th`, the accumulated count that must be exceeded.
    pub count: usize,
}

impl Default for TriggerThresholds {
    fn default() -> Self {
        Self {
            image: 1.0,
            mask: 0.0,
            count: 200,
        }
    }
}

/// Running variation degree `P` since the last update.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct TriggerState {
    pub variation: usize,
    pub thresholds: TriggerThresholds,
}

impl TriggerState {
    pub fn new(thresholds: TriggerThresholds) -> Self {
        Self {
            variation: 0,
            thresholds,
        }
    }
}

/// Adds the number of varied pixels to `P`; fires (and resets `P`) once
/// `P > P_th`.
pub fn trigger_step(
    state: TriggerState,
    image_diff: &DiffMap,
    mask_diff: &DiffMap,
) -> Result<(TriggerState, bool)> {
    if image_diff.shape() != mask_diff.shape() {
        return dim_err(format!(
            "diff maps {:?} and {:?} differ",
            image_diff.shape(),
            mask_diff.shape()
        ));
    }
    let th = state.thresholds;
    let varied = image_diff
        .data()
        .iter()
        .zip(mask_diff.data())
        .filter(|(&df, &dm)| df > th.image || dm > th.mask)
        .count();
    let variation = state.variation + varied;
    if variation > th.count {
        Ok((
            TriggerState {
                variation: 0,
                ..state
            },
            true,
        ))
    } else {
        Ok((TriggerState { variation, ..state }, false))
    }
}

/// What a trigger policy sees after frame `index` has been segmented.
pub struct FrameObservation<'a> {
    pub index: usize,
    pub frame: &'a Frame,
    pub mask: &'a MaskMap,
    pub prev_frame: &'a Frame,
    pub prev_mask: &'a MaskMap,
}

/// Decides, frame by frame, whether the memory gets updated.
pub trait TriggerPolicy: Send {
    fn name(&self) -> &'static str;

    fn decide(&mut self, obs: &FrameObservation<'_>) -> Result<bool>;

    /// Running variation degree, for policies that keep one.
    fn variation(&self) -> Option<usize> {
        None
    }
}

pub struct VariationAwareTrigger {
    state: TriggerState,
}

impl VariationAwareTrigger {
    pub fn new(thresholds: TriggerThresholds) -> Self {
        Self {
            state: TriggerState::new(thresholds),
        }
    }

    pub fn state(&self) -> TriggerState {
        self.state
    }
}

impl TriggerPolicy for VariationAwareTrigger {
    fn name(&self) -> &'static str {
        "var"
    }

    fn decide(&mut self, obs: &FrameObservation<'_>) -> Result<bool> {
        let df = frame_difference(obs.frame, obs.prev_frame)?;
        let dm = mask_difference(obs.mask, obs.prev_mask)?;
        let (state, fired) = trigger_step(self.state, &df, &dm)?;
        self.state = state;
        Ok(fired)
    }

    fn variation(&self) -> Option<usize> {
        Some(self.state.variation)
    }
}

pub struct EveryFrameTrigger;

impl TriggerPolicy for EveryFrameTrigger {
    fn name(&self) -> &'static str {
        "every"
    }

    fn decide(&mut self, _: &FrameObservation<'_>) -> Result<bool> {
        Ok(true)
    }
}

/// Fires on every `period`-th frame (frame indices are 0-based; frame 0 is
/// the annotated one).
pub struct PeriodicTrigger {
    period: usize,
}

impl PeriodicTrigger {
    pub fn new(period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::Config("periodic trigger needs a period ≥ 1".into()));
        }
        Ok(Self { period })
    }
}

impl TriggerPolicy for PeriodicTrigger {
    fn name(&self) -> &'static str {
        "periodic"
    }

    fn decide(&mut self, obs: &FrameObservation<'_>) -> Result<bool> {
        Ok(obs.index.is_multiple_of(self.period))
    }
}

pub struct NeverTrigger;

impl TriggerPolicy for NeverTrigger {
    fn name(&self) -> &'static str {
        "never"
    }

    fn decide(&mut self, _: &FrameObservation<'_>) -> Result<bool> {
        Ok(false)
    }
}
