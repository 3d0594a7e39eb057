//! Picking the query pixels least represented in memory.

use super::PixelMemory;
use crate::encoder::KeyMap;
use crate::error::{dim_err, Error, Result};
use crate::tensor::{dot, Tensor};

/// `⌊beta · pixels⌋`, guarded against representation error in `beta`.
pub fn update_count(beta: f64, pixels: usize) -> usize {
    ((beta * pixels as f64) + 1e-9).floor() as usize
}

fn squared_norms(rows: &[f32], width: usize) -> Vec<f32> {
    rows.chunks_exact(width).map(|r| dot(r, r)).collect()
}

/// `a·b / sqrt(|a|²|b|²)`; the product under the root is exact in `f64`, so
/// a vector compared with itself scores exactly 1. Zero vectors score 0.
#[inline]
fn cosine(a: &[f32], a_sq: f32, b: &[f32], b_sq: f32) -> f32 {
    let denom = (a_sq as f64 * b_sq as f64).sqrt();
    if denom > 0.0 {
        ((dot(a, b) as f64 / denom) as f32).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

fn query_rows(query: &KeyMap, memory: &PixelMemory) -> Result<(usize, usize)> {
    let (hw, c) = match query.shape() {
        &[h, w, c] => (h * w, c),
        &[n, c] => (n, c),
        s => return dim_err(format!("query keys must be H×W×C or N×C, got {s:?}")),
    };
    if c != memory.key_channels() {
        return dim_err(format!(
            "query key width {c} vs memory key width {}",
            memory.key_channels()
        ));
    }
    Ok((hw, c))
}

/// Full `HW × k` cosine similarity between query keys and memory keys.
pub fn cosine_similarity(query: &KeyMap, memory: &PixelMemory) -> Result<Tensor> {
    let (hw, c) = query_rows(query, memory)?;
    if memory.is_empty() {
        return Err(Error::Precondition("memory is empty".into()));
    }
    let qn = squared_norms(query.data(), c);
    let kn = squared_norms(memory.keys(), c);
    let mut out = Vec::with_capacity(hw * memory.len());
    for (q, &qnorm) in query.data().chunks_exact(c).zip(&qn) {
        for (j, &knorm) in kn.iter().enumerate() {
            out.push(cosine(q, qnorm, memory.key(j), knorm));
        }
    }
    Tensor::new(vec![hw, memory.len()], out)
}

/// Per query pixel, its highest cosine similarity to any memory entry.
pub fn max_similarity(query: &KeyMap, memory: &PixelMemory) -> Result<Vec<f32>> {
    let (_, c) = query_rows(query, memory)?;
    if memory.is_empty() {
        return Err(Error::Precondition("memory is empty".into()));
    }
    let kn = squared_norms(memory.keys(), c);
    Ok(query
        .data()
        .chunks_exact(c)
        .map(|q| {
            let qnorm = dot(q, q);
            kn.iter()
                .enumerate()
                .map(|(j, &knorm)| cosine(q, qnorm, memory.key(j), knorm))
                .fold(f32::NEG_INFINITY, f32::max)
        })
        .collect())
}

/// The `⌊beta·HW⌋` pixels whose best memory match is weakest, ordered by
/// ascending similarity (ties by raster index).
pub fn select_update_pixels(query: &KeyMap, memory: &PixelMemory, beta: f64) -> Result<Vec<usize>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Precondition(format!("beta {beta} outside (0, 1]")));
    }
    let sims = max_similarity(query, memory)?;
    let mut order: Vec<usize> = (0..sims.len()).collect();
    order.sort_by(|&a, &b| sims[a].total_cmp(&sims[b]).then(a.cmp(&b)));
    order.truncate(update_count(beta, sims.len()));
    Ok(order)
}
