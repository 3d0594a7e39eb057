//! Synthetic clips, segmentation metrics and throughput measurement.

mod metrics;
mod synth;

pub(crate) use metrics::fps;
pub use metrics::{
    boundary_f, boundary_pixels, default_tolerance, evaluate, jaccard, measure_fps, MetricReport,
};
pub use synth::{generate_clip, ClipSpec, MotionSpec, SpriteShape, SynthClip, DEFAULT_CLIP_LEN};
