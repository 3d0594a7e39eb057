//! Non-local read of the pixel memory.

use super::PixelMemory;
use crate::encoder::{KeyMap, ValueMap};
use crate::error::{dim_err, Error, Result};
use crate::tensor::{concat_channels, dot, Tensor};

fn check(query_key: &KeyMap, memory: &PixelMemory) -> Result<(usize, usize, usize)> {
    let (h, w, ck) = query_key.dims3()?;
    if ck != memory.key_channels() {
        return dim_err(format!(
            "query key width {ck} vs memory key width {}",
            memory.key_channels()
        ));
    }
    if memory.is_empty() {
        return Err(Error::Precondition("memory is empty".into()));
    }
    Ok((h, w, ck))
}

/// Fills `row` with the softmax over memory of the dot-product logits of `q`.
fn affinity_row(q: &[f32], memory: &PixelMemory, row: &mut [f32]) {
    let ck = memory.key_channels();
    let mut max = f32::NEG_INFINITY;
    for (j, keys) in memory.keys().chunks_exact(ck).enumerate() {
        let logit = dot(q, keys);
        row[j] = logit;
        max = max.max(logit);
    }
    let mut sum = 0.0f32;
    for a in row.iter_mut() {
        *a = (*a - max).exp();
        sum += *a;
    }
    let inv = 1.0 / sum;
    row.iter_mut().for_each(|a| *a *= inv);
}

/// Row-stochastic `HW × k` affinity between query pixels and memory entries.
pub fn affinity(query_key: &KeyMap, memory: &PixelMemory) -> Result<Tensor> {
    let (h, w, ck) = check(query_key, memory)?;
    let k = memory.len();
    let mut out = vec![0.0f32; h * w * k];
    for (q, row) in query_key
        .data()
        .chunks_exact(ck)
        .zip(out.chunks_exact_mut(k))
    {
        affinity_row(q, memory, row);
    }
    Tensor::new(vec![h * w, k], out)
}

/// `A × V_mem` on the query grid: `H×W×C_v(memory)`.
///
/// Streams one query row at a time so the `HW × k` affinity is never
/// materialised.
pub fn memory_read(query_key: &KeyMap, memory: &PixelMemory) -> Result<Tensor> {
    let (h, w, ck) = check(query_key, memory)?;
    let cv = memory.value_channels();
    let mut weights = vec![0.0f32; memory.len()];
    let mut out = vec![0.0f32; h * w * cv];
    for (q, acc) in query_key
        .data()
        .chunks_exact(ck)
        .zip(out.chunks_exact_mut(cv))
    {
        affinity_row(q, memory, &mut weights);
        for (&a, v) in weights.iter().zip(memory.values().chunks_exact(cv)) {
            for (o, &x) in acc.iter_mut().zip(v) {
                *o += a * x;
            }
        }
    }
    Tensor::new(vec![h, w, cv], out)
}

/// Activated feature `[A × V_mem, V_query]` on the query grid.
pub fn memory_match(
    query_key: &KeyMap,
    query_value: &ValueMap,
    memory: &PixelMemory,
) -> Result<Tensor> {
    let read = memory_read(query_key, memory)?;
    let (h, w, _) = query_key.dims3()?;
    let (vh, vw, _) = query_value.dims3()?;
    if (h, w) != (vh, vw) {
        return dim_err(format!("query key grid {h}×{w} vs value grid {vh}×{vw}"));
    }
    concat_channels(&[&read, query_value])
}
