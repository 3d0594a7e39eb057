//! Timing against synthetic memories of a chosen size.

use std::time::Instant;

use anyhow::Result;
use pam_core::decoder::DecodeContext;
use pam_core::encoder::{KeyMap, ValueMap};
use pam_core::pam::{memory_match, PixelMemory, Provenance};
use pam_core::pipeline::SequenceConfig;
use pam_core::registry::EncoderParams;
use pam_core::{Frame, StrategyRegistry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub memory_size: usize,
    pub match_ms: f64,
    pub encode_ms: f64,
    pub decode_ms: f64,
    pub fps: f64,
}

/// `size` entries with uniform keys in `[-1, 1)` and values in `[0, 1)`.
pub fn inject_memory(
    key_channels: usize,
    value_channels: usize,
    size: usize,
    seed: u64,
) -> Result<PixelMemory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mem = PixelMemory::empty(key_channels, value_channels);
    let mut key = vec![0.0f32; key_channels];
    let mut value = vec![0.0f32; value_channels];
    for i in 0..size {
        key.iter_mut().for_each(|k| *k = rng.gen_range(-1.0..1.0));
        value.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
        mem.push_entry(
            &key,
            &value,
            Provenance {
                frame: 0,
                row: 0,
                col: i,
            },
        )?;
    }
    Ok(mem)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Wall time of `reps` memory matches, one entry per repetition, in ms.
pub fn time_match(
    key: &KeyMap,
    value: &ValueMap,
    memory: &PixelMemory,
    reps: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        let a = memory_match(key, value, memory)?;
        out.push(ms_since(t));
        std::hint::black_box(a);
    }
    Ok(out)
}

/// Per memory size: median per-frame encode/match/decode time over `reps`
/// passes of the clip, and frames per second over those three stages.
pub fn bench_clip(
    frames: &[Frame],
    cfg: &SequenceConfig,
    sizes: &[usize],
    reps: usize,
) -> Result<Vec<BenchRow>> {
    let registry = StrategyRegistry::builtin();
    let encoder = registry.encoder(
        &cfg.encoder,
        &EncoderParams {
            seed: cfg.seed,
            widths: cfg.widths,
            key_gain: cfg.key_gain,
            weights: cfg.weights.clone(),
        },
    )?;
    let decoder = registry.decoder(&cfg.decoder)?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let memory = inject_memory(
            encoder.key_channels(),
            encoder.value_channels(),
            size,
            cfg.seed,
        )?;
        let (mut enc, mut mat, mut dec) = (Vec::new(), Vec::new(), Vec::new());
        let started = Instant::now();
        for _ in 0..reps {
            for frame in frames {
                let t = Instant::now();
                let query = encoder.encode_query(frame)?;
                enc.push(ms_since(t));
                let t = Instant::now();
                let activated = memory_match(&query.key, &query.value, &memory)?;
                mat.push(ms_since(t));
                let t = Instant::now();
                let mask = decoder.decode(&DecodeContext {
                    query: &query,
                    activated: &activated,
                    memory: &memory,
                    weights: encoder.weights(),
                })?;
                dec.push(ms_since(t));
                std::hint::black_box(mask);
            }
        }
        let seconds = started.elapsed().as_secs_f64();
        rows.push(BenchRow {
            memory_size: size,
            match_ms: median(&mut mat),
            encode_ms: median(&mut enc),
            decode_ms: median(&mut dec),
            fps: (reps * frames.len()) as f64 / seconds.max(f64::MIN_POSITIVE),
        });
    }
    Ok(rows)
}
