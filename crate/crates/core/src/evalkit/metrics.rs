//! Region (Jaccard) and boundary (F-measure) accuracy, plus throughput.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::frame::MaskMap;
use crate::pipeline::RunReport;

fn same_extents(a: &MaskMap, b: &MaskMap) -> Result<()> {
    if a.extents() != b.extents() {
        return dim_err(format!(
            "masks {:?} and {:?} differ",
            a.extents(),
            b.extents()
        ));
    }
    Ok(())
}

/// |pred ∩ gt| / |pred ∪ gt|; two empty masks score 1.
pub fn jaccard(pred: &MaskMap, gt: &MaskMap) -> Result<f64> {
    same_extents(pred, gt)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Foreground pixels with a 4-neighbour in the background; pixels outside
/// the image count as background.
pub fn boundary_pixels(mask: &MaskMap) -> Vec<bool> {
    let (h, w) = mask.extents();
    let mut out = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(y, x) {
                continue;
            }
            let edge = y == 0
                || x == 0
                || y + 1 == h
                || x + 1 == w
                || !mask.get(y - 1, x)
                || !mask.get(y + 1, x)
                || !mask.get(y, x - 1)
                || !mask.get(y, x + 1);
            out[y * w + x] = edge;
        }
    }
    out
}

/// `⌈0.008 · diagonal⌉` pixels.
pub fn default_tolerance(height: usize, width: usize) -> usize {
    (0.008 * ((height * height + width * width) as f64).sqrt()).ceil() as usize
}

/// Square (Chebyshev) dilation by `radius`, as two separable passes.
fn dilate(bits: &[bool], h: usize, w: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return bits.to_vec();
    }
    let mut rows = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            rows[y * w + x] = bits[y * w + lo..=y * w + hi].iter().any(|&b| b);
        }
    }
    let mut out = vec![false; h * w];
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).any(|yy| rows[yy * w + x]);
        }
    }
    out
}

/// Boundary F-measure with a Chebyshev tolerance of `tol` pixels.
pub fn boundary_f(pred: &MaskMap, gt: &MaskMap, tol: usize) -> Result<f64> {
    same_extents(pred, gt)?;
    let (h, w) = pred.extents();
    let pb = boundary_pixels(pred);
    let gb = boundary_pixels(gt);
    let np = pb.iter().filter(|&&b| b).count();
    let ng = gb.iter().filter(|&&b| b).count();
    match (np, ng) {
        (0, 0) => return Ok(1.0),
        (0, _) | (_, 0) => return Ok(0.0),
        _ => {}
    }
    let gd = dilate(&gb, h, w, tol);
    let pd = dilate(&pb, h, w, tol);
    let hit_p = pb.iter().zip(&gd).filter(|(&b, &d)| b && d).count();
    let hit_g = gb.iter().zip(&pd).filter(|(&b, &d)| b && d).count();
    let precision = hit_p as f64 / np as f64;
    let recall = hit_g as f64 / ng as f64;
    Ok(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_frame_j: Vec<f64>,
    pub per_frame_f: Vec<f64>,
    pub mean_j: f64,
    pub mean_f: f64,
    /// `(mean_j + mean_f) / 2`.
    pub jf: f64,
    pub fps: f64,
}

/// Scores predictions against ground truth. The annotated first frame is
/// excluded whenever there is anything else to score.
pub fn evaluate(preds: &[MaskMap], gts: &[MaskMap], fps: f64) -> Result<MetricReport> {
    if preds.len() != gts.len() || preds.is_empty() {
        return Err(Error::Precondition(format!(
            "{} predictions vs {} ground-truth masks",
            preds.len(),
            gts.len()
        )));
    }
    let skip = usize::from(preds.len() > 1);
    let mut per_frame_j = Vec::new();
    let mut per_frame_f = Vec::new();
    for (p, g) in preds.iter().zip(gts).skip(skip) {
        let (h, w) = g.extents();
        per_frame_j.push(jaccard(p, g)?);
        per_frame_f.push(boundary_f(p, g, default_tolerance(h, w))?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mean_j = mean(&per_frame_j);
    let mean_f = mean(&per_frame_f);
    Ok(MetricReport {
        per_frame_j,
        per_frame_f,
        mean_j,
        mean_f,
        jf: (mean_j + mean_f) / 2.0,
        fps,
    })
}

/// Frames per wall-clock second, initialisation included.
pub fn measure_fps(report: &RunReport) -> f64 {
    fps(report.frames.len(), report.total_seconds)
}

pub(crate) fn fps(frames: usize, seconds: f64) -> f64 {
    frames as f64 / seconds.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(h: usize, w: usize, y0: usize, x0: usize, rh: usize, rw: usize) -> MaskMap {
        MaskMap::from_fn(w, h, |y, x| {
            (y0..y0 + rh).contains(&y) && (x0..x0 + rw).contains(&x)
        })
    }

    /// For every boundary pixel of `a`, is some boundary pixel of `b` within
    /// Chebyshev distance `tol`? Exhaustive pairwise search.
    fn brute_matched(a: &[bool], b: &[bool], w: usize, tol: usize) -> (usize, usize) {
        let pts = |m: &[bool]| -> Vec<(i64, i64)> {
            m.iter()
                .enumerate()
                .filter(|(_, &v)| v)
                .map(|(i, _)| ((i / w) as i64, (i % w) as i64))
                .collect()
        };
        let (pa, pb) = (pts(a), pts(b));
        let hits = pa
            .iter()
            .filter(|&&(y, x)| {
                pb.iter()
                    .any(|&(v, u)| (y - v).abs().max((x - u).abs()) <= tol as i64)
            })
            .count();
        (hits, pa.len())
    }

    fn brute_f(pred: &MaskMap, gt: &MaskMap, tol: usize) -> f64 {
        let w = pred.width();
        let pb = boundary_pixels(pred);
        let gb = boundary_pixels(gt);
        let (hp, np) = brute_matched(&pb, &gb, w, tol);
        let (hg, ng) = brute_matched(&gb, &pb, w, tol);
        let (p, r) = (hp as f64 / np as f64, hg as f64 / ng as f64);
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    #[test]
    fn jaccard_cases() {
        let a = rect(32, 32, 4, 4, 10, 10);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &rect(32, 32, 20, 20, 5, 5)).unwrap(), 0.0);
        // two 8×16 rectangles overlapping in 8×8: 64 / (128 + 128 - 64)
        let b = rect(32, 32, 0, 0, 8, 16);
        let c = rect(32, 32, 0, 8, 8, 16);
        assert_eq!(jaccard(&b, &c).unwrap(), 1.0 / 3.0);
        assert_eq!(
            jaccard(&MaskMap::empty(4, 4), &MaskMap::empty(4, 4)).unwrap(),
            1.0
        );
        assert!(jaccard(&a, &MaskMap::empty(4, 4)).is_err());
    }

    #[test]
    fn boundary_of_a_filled_square() {
        let b = boundary_pixels(&rect(8, 8, 2, 2, 4, 4));
        assert_eq!(b.iter().filter(|&&v| v).count(), 12);
        // whole-image mask still has a boundary along the frame edge
        let full = MaskMap::from_fn(4, 4, |_, _| true);
        assert_eq!(boundary_pixels(&full).iter().filter(|&&v| v).count(), 12);
    }

    #[test]
    fn boundary_f_identity_and_one_pixel_shift() {
        let a = rect(64, 64, 10, 10, 20, 20);
        assert_eq!(boundary_f(&a, &a, 0).unwrap(), 1.0);
        let b = rect(64, 64, 10, 11, 20, 20);
        assert_eq!(boundary_f(&a, &b, 1).unwrap(), 1.0);
        assert!(boundary_f(&a, &b, 0).unwrap() < 1.0);
    }

    #[test]
    fn boundary_f_shifted_square_matches_brute_force() {
        for tol in 1..=3 {
            let a = rect(64, 64, 16, 16, 24, 24);
            let b = rect(64, 64, 16 + 2 * tol, 16 + 2 * tol, 24, 24);
            let want = brute_f(&a, &b, tol);
            let got = boundary_f(&a, &b, tol).unwrap();
            assert!((got - want).abs() < 1e-9, "tol {tol}: {got} vs {want}");
            assert!(got < 1.0);
        }
    }

    #[test]
    fn empty_cases() {
        let e = MaskMap::empty(8, 8);
        assert_eq!(boundary_f(&e, &e, 1).unwrap(), 1.0);
        assert_eq!(boundary_f(&e, &rect(8, 8, 1, 1, 2, 2), 1).unwrap(), 0.0);
    }

    #[test]
    fn default_tolerance_values() {
        assert_eq!(default_tolerance(256, 256), 3);
        assert_eq!(default_tolerance(384, 384), 5);
        assert_eq!(default_tolerance(480, 854), 8);
    }

    #[test]
    fn evaluate_skips_annotated_frame() {
        let gt = rect(32, 32, 4, 4, 8, 8);
        let r = evaluate(
            &[MaskMap::empty(32, 32), gt.clone()],
            &[gt.clone(), gt.clone()],
            10.0,
        )
        .unwrap();
        assert_eq!(r.per_frame_j, vec![1.0]);
        assert_eq!(r.jf, 1.0);
        assert!(evaluate(&[], &[], 1.0).is_err());
    }

    fn arb_mask() -> impl Strategy<Value = MaskMap> {
        proptest::collection::vec(proptest::bool::weighted(0.4), 12 * 10)
            .prop_map(|bits| MaskMap::new(12, 10, bits).unwrap())
    }

    proptest! {
        #[test]
        fn metrics_are_symmetric_and_bounded(a in arb_mask(), b in arb_mask(), tol in 0usize..3) {
            let j = jaccard(&a, &b).unwrap();
            prop_assert_eq!(j, jaccard(&b, &a).unwrap());
            let f = boundary_f(&a, &b, tol).unwrap();
            prop_assert!((f - boundary_f(&b, &a, tol).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&j) && (0.0..=1.0).contains(&f));
            if a.area() > 0 {
                prop_assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
                prop_assert_eq!(boundary_f(&a, &a, tol).unwrap(), 1.0);
            }
        }

        #[test]
        fn dilation_matches_brute_force(a in arb_mask(), b in arb_mask(), tol in 0usize..4) {
            if a.area() > 0 && b.area() > 0 {
                let f = boundary_f(&a, &b, tol).unwrap();
                prop_assert!((f - brute_f(&a, &b, tol)).abs() < 1e-9);
            }
        }
    }
}
