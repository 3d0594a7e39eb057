//! Per-frame inference: encode → match → decode → trigger → (update).

mod ablate;

pub use ablate::{ablate, default_grid, AblationPoint, AblationRow, AblationStats};

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decoder::{DecodeContext, MaskDecoder};
use crate::encoder::{check_divisible, EncoderWeights, FrameEncoder, Widths, DEFAULT_KEY_GAIN};
use crate::error::{dim_err, Error, Result};
use crate::evalkit::{evaluate, fps, MetricReport};
use crate::frame::{Frame, MaskMap};
use crate::pam::{
    memory_init, memory_match, select_update_pixels, FrameObservation, PixelMemory, TriggerPolicy,
    TriggerThresholds,
};
use crate::registry::{EncoderParams, StrategyRegistry};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceConfig {
    /// Fraction of query pixels appended per triggered frame.
    pub beta: f64,
    pub thresholds: TriggerThresholds,
    /// Trigger strategy, e.g. `var`, `every`, `periodic=5`, `never`.
    pub trigger: String,
    pub encoder: String,
    pub decoder: String,
    pub seed: u64,
    pub widths: Widths,
    pub key_gain: f32,
    pub memory_cap: Option<usize>,
    /// Expected `(H, W)`; checked against every frame when set.
    pub extents: Option<(usize, usize)>,
    /// Preloaded weights, overriding `seed`/`widths`/`key_gain`.
    #[serde(skip)]
    pub weights: Option<Arc<EncoderWeights>>,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            beta: 0.10,
            thresholds: TriggerThresholds::default(),
            trigger: "var".into(),
            encoder: "handcrafted".into(),
            decoder: "propagate".into(),
            seed: 0,
            widths: Widths::default(),
            key_gain: DEFAULT_KEY_GAIN,
            memory_cap: None,
            extents: None,
            weights: None,
        }
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta {} outside (0, 1]", self.beta)));
        }
        let th = self.thresholds;
        if !th.image.is_finite() || !th.mask.is_finite() {
            return Err(Error::Config("trigger thresholds must be finite".into()));
        }
        if !self.key_gain.is_finite() {
            return Err(Error::Config("key gain must be finite".into()));
        }
        if let Some((h, w)) = self.extents {
            check_divisible(h, w, 16)?;
        }
        Ok(())
    }

    fn encoder_params(&self) -> EncoderParams {
        EncoderParams {
            seed: self.seed,
            widths: self.widths,
            key_gain: self.key_gain,
            weights: self.weights.clone(),
        }
    }
}

/// Per-stage wall time in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTimings {
    pub encode_ms: f64,
    pub match_ms: f64,
    pub decode_ms: f64,
    pub update_ms: f64,
}

impl FrameTimings {
    pub fn total_ms(&self) -> f64 {
        self.encode_ms + self.match_ms + self.decode_ms + self.update_ms
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub index: usize,
    pub mask: MaskMap,
    pub triggered: bool,
    /// Entries added on this frame.
    pub appended: usize,
    pub memory_size_after: usize,
    /// Running variation degree after this frame, for the variation-aware
    /// trigger.
    pub variation: Option<usize>,
    pub timings: FrameTimings,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config: SequenceConfig,
    pub frames: Vec<FrameResult>,
    /// Triggered updates after initialisation.
    pub triggers: usize,
    pub final_memory: usize,
    pub total_seconds: f64,
    pub fps: f64,
    pub metrics: Option<MetricReport>,
}

/// One aggregate row of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: usize,
    pub triggers: usize,
    pub final_memory: usize,
    pub total_seconds: f64,
    pub fps: f64,
    pub mean_j: Option<f64>,
    pub mean_f: Option<f64>,
    pub jf: Option<f64>,
}

impl RunReport {
    pub fn masks(&self) -> Vec<MaskMap> {
        self.frames.iter().map(|f| f.mask.clone()).collect()
    }

    /// Scores the predicted masks against `gts` and stores the result.
    pub fn attach_metrics(&mut self, gts: &[MaskMap]) -> Result<&MetricReport> {
        let report = evaluate(&self.masks(), gts, self.fps)?;
        Ok(self.metrics.insert(report))
    }

    /// Copy with every wall-clock field zeroed.
    pub fn strip_timings(&self) -> RunReport {
        let mut r = self.clone();
        r.total_seconds = 0.0;
        r.fps = 0.0;
        for f in &mut r.frames {
            f.timings = FrameTimings::default();
        }
        if let Some(m) = &mut r.metrics {
            m.fps = 0.0;
        }
        r
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            frames: self.frames.len(),
            triggers: self.triggers,
            final_memory: self.final_memory,
            total_seconds: self.total_seconds,
            fps: self.fps,
            mean_j: self.metrics.as_ref().map(|m| m.mean_j),
            mean_f: self.metrics.as_ref().map(|m| m.mean_f),
            jf: self.metrics.as_ref().map(|m| m.jf),
        }
    }

    /// Summed match time over all frames, in milliseconds.
    pub fn match_ms(&self) -> f64 {
        self.frames.iter().map(|f| f.timings.match_ms).sum()
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Stateful, strictly serial processing of one sequence.
pub struct SequenceRunner {
    cfg: SequenceConfig,
    encoder: Arc<dyn FrameEncoder>,
    decoder: Box<dyn MaskDecoder>,
    trigger: Box<dyn TriggerPolicy>,
    memory: PixelMemory,
    prev_frame: Frame,
    prev_mask: MaskMap,
    results: Vec<FrameResult>,
    triggers: usize,
    started: Instant,
}

impl SequenceRunner {
    /// Encodes the annotated frame and commits all of its pixels to memory.
    pub fn start(
        registry: &StrategyRegistry,
        cfg: SequenceConfig,
        frame: &Frame,
        mask: &MaskMap,
    ) -> Result<Self> {
        let started = Instant::now();
        cfg.validate()?;
        let extents = frame.extents();
        if let Some(want) = cfg.extents {
            if want != extents {
                return dim_err(format!("frame {extents:?} vs configured extents {want:?}"));
            }
        }
        if mask.extents() != extents {
            return dim_err(format!(
                "first mask {:?} vs frame {extents:?}",
                mask.extents()
            ));
        }
        let encoder = registry.encoder(&cfg.encoder, &cfg.encoder_params())?;
        let decoder = registry.decoder(&cfg.decoder)?;
        let trigger = registry.trigger(&cfg.trigger, cfg.thresholds)?;

        let t = Instant::now();
        let query = encoder.encode_query(frame)?;
        let encode_ms = ms_since(t);
        let t = Instant::now();
        let (key, value) = encoder.encode_reference(&query.pyramid, mask)?;
        let memory = memory_init(&key, &value)?.with_cap(cfg.memory_cap);
        if let Some(cap) = cfg.memory_cap {
            if memory.len() > cap {
                return Err(Error::MemoryFull {
                    cap,
                    current: 0,
                    requested: memory.len(),
                });
            }
        }
        let update_ms = ms_since(t);

        let first = FrameResult {
            index: 0,
            mask: mask.clone(),
            triggered: false,
            appended: memory.len(),
            memory_size_after: memory.len(),
            variation: trigger.variation(),
            timings: FrameTimings {
                encode_ms,
                update_ms,
                ..FrameTimings::default()
            },
        };
        Ok(Self {
            cfg,
            encoder,
            decoder,
            trigger,
            memory,
            prev_frame: frame.clone(),
            prev_mask: mask.clone(),
            results: vec![first],
            triggers: 0,
            started,
        })
    }

    pub fn memory(&self) -> &PixelMemory {
        &self.memory
    }

    pub fn encoder(&self) -> &dyn FrameEncoder {
        self.encoder.as_ref()
    }

    pub fn results(&self) -> &[FrameResult] {
        &self.results
    }

    /// Segments the next frame and updates memory if the trigger fires.
    pub fn step(&mut self, frame: &Frame) -> Result<&FrameResult> {
        if frame.extents() != self.prev_frame.extents() {
            return dim_err(format!(
                "frame {:?} vs sequence {:?}",
                frame.extents(),
                self.prev_frame.extents()
            ));
        }
        let index = self.results.len();
        let mut timings = FrameTimings::default();

        let t = Instant::now();
        let query = self.encoder.encode_query(frame)?;
        timings.encode_ms = ms_since(t);

        let t = Instant::now();
        let activated = memory_match(&query.key, &query.value, &self.memory)?;
        timings.match_ms = ms_since(t);

        let t = Instant::now();
        let mask = self.decoder.decode(&DecodeContext {
            query: &query,
            activated: &activated,
            memory: &self.memory,
            weights: self.encoder.weights(),
        })?;
        timings.decode_ms = ms_since(t);

        let t = Instant::now();
        let triggered = self.trigger.decide(&FrameObservation {
            index,
            frame,
            mask: &mask,
            prev_frame: &self.prev_frame,
            prev_mask: &self.prev_mask,
        })?;
        let mut appended = 0;
        if triggered {
            let (key, value) = self.encoder.encode_reference(&query.pyramid, &mask)?;
            let mut idx = select_update_pixels(&key, &self.memory, self.cfg.beta)?;
            idx.sort_unstable();
            self.memory.append(&idx, &key, &value, index)?;
            appended = idx.len();
            self.triggers += 1;
        }
        timings.update_ms = ms_since(t);

        self.prev_frame = frame.clone();
        self.prev_mask = mask.clone();
        self.results.push(FrameResult {
            index,
            mask,
            triggered,
            appended,
            memory_size_after: self.memory.len(),
            variation: self.trigger.variation(),
            timings,
        });
        Ok(self.results.last().expect("just pushed"))
    }

    pub fn finish(self) -> RunReport {
        let total_seconds = self.started.elapsed().as_secs_f64();
        RunReport {
            fps: fps(self.results.len(), total_seconds),
            final_memory: self.memory.len(),
            triggers: self.triggers,
            frames: self.results,
            total_seconds,
            config: self.cfg,
            metrics: None,
        }
    }

    /// Like [`finish`](Self::finish), also handing back the memory.
    pub fn finish_with_memory(self) -> (RunReport, PixelMemory) {
        let memory = self.memory.clone();
        (self.finish(), memory)
    }
}

/// Segments `frames` given the annotation of the first one.
pub fn segment_sequence(
    frames: &[Frame],
    first_mask: &MaskMap,
    cfg: &SequenceConfig,
) -> Result<RunReport> {
    segment_sequence_with(&StrategyRegistry::builtin(), frames, first_mask, cfg)
}

pub fn segment_sequence_with(
    registry: &StrategyRegistry,
    frames: &[Frame],
    first_mask: &MaskMap,
    cfg: &SequenceConfig,
) -> Result<RunReport> {
    let (first, rest) = frames
        .split_first()
        .ok_or_else(|| Error::Precondition("empty frame list".into()))?;
    if let Some(f) = rest.iter().find(|f| f.extents() != first.extents()) {
        return dim_err(format!(
            "frame {:?} vs first frame {:?}",
            f.extents(),
            first.extents()
        ));
    }
    let mut runner = SequenceRunner::start(registry, cfg.clone(), first, first_mask)?;
    for frame in rest {
        runner.step(frame)?;
    }
    Ok(runner.finish())
}
