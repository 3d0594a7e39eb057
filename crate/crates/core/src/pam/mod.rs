//! Pixel-adaptive memory: when to update, which pixels to add, and how the
//! memory is read.

mod matching;
mod memory;
mod select;
mod trigger;

pub use matching::{affinity, memory_match, memory_read};
pub use memory::{memory_init, PixelMemory, Provenance};
pub use select::{cosine_similarity, max_similarity, select_update_pixels, update_count};
pub use trigger::{
    frame_difference, mask_difference, trigger_step, DiffMap, EveryFrameTrigger, FrameObservation,
    NeverTrigger, PeriodicTrigger, TriggerPolicy, TriggerState, TriggerThresholds,
    VariationAwareTrigger,
};
