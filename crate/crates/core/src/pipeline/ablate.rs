use serde::{Deserialize, Serialize};

use super::{segment_sequence_with, SequenceConfig};
use crate::error::{Error, Result};
use crate::evalkit::SynthClip;
use crate::registry::StrategyRegistry;

/// One grid cell: a trigger strategy and an update ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub trigger: String,
    pub beta: f64,
}

impl AblationPoint {
    pub fn new(trigger: &str, beta: f64) -> Self {
        Self {
            trigger: trigger.to_string(),
            beta,
        }
    }

    pub fn label(&self) -> String {
        format!("{}/beta={}", self.trigger, self.beta)
    }
}

/// `{var, periodic=5} × {1.0, 0.10}`.
pub fn default_grid() -> Vec<AblationPoint> {
    let mut grid = Vec::new();
    for trigger in ["var", "periodic=5"] {
        for beta in [1.0, 0.10] {
            grid.push(AblationPoint::new(trigger, beta));
        }
    }
    grid
}

/// Means over clips; `final_memory` and `triggers` are summed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationStats {
    pub mean_j: f64,
    pub mean_f: f64,
    pub jf: f64,
    pub fps: f64,
    pub final_memory: usize,
    pub triggers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub config: String,
    pub point: AblationPoint,
    pub stats: Option<AblationStats>,
    pub error: Option<String>,
}

fn run_point(
    registry: &StrategyRegistry,
    clips: &[SynthClip],
    base: &SequenceConfig,
    point: &AblationPoint,
) -> Result<AblationStats> {
    let cfg = SequenceConfig {
        trigger: point.trigger.clone(),
        beta: point.beta,
        ..base.clone()
    };
    let mut sum = AblationStats {
        mean_j: 0.0,
        mean_f: 0.0,
        jf: 0.0,
        fps: 0.0,
        final_memory: 0,
        triggers: 0,
    };
    for clip in clips {
        let mut report = segment_sequence_with(registry, &clip.frames, &clip.gt_masks[0], &cfg)?;
        let m = report.attach_metrics(&clip.gt_masks)?;
        sum.mean_j += m.mean_j;
        sum.mean_f += m.mean_f;
        sum.jf += m.jf;
        sum.fps += report.fps;
        sum.final_memory += report.final_memory;
        sum.triggers += report.triggers;
    }
    let n = clips.len() as f64;
    Ok(AblationStats {
        mean_j: sum.mean_j / n,
        mean_f: sum.mean_f / n,
        jf: sum.jf / n,
        fps: sum.fps / n,
        ..sum
    })
}

/// Runs every grid point on the same clips. Duplicate points are dropped
/// with a warning; a failing point yields a row with `error` set.
pub fn ablate(
    registry: &StrategyRegistry,
    clips: &[SynthClip],
    base: &SequenceConfig,
    grid: &[AblationPoint],
) -> Result<Vec<AblationRow>> {
    if grid.is_empty() {
        return Err(Error::Config("ablation grid is empty".into()));
    }
    if clips.is_empty() {
        return Err(Error::Precondition("no clips to ablate on".into()));
    }
    let mut seen: Vec<(String, u64)> = Vec::new();
    let mut rows = Vec::new();
    for point in grid {
        // unknown triggers still get a row, reported as an error
        let key = (
            registry
                .canonical_trigger(&point.trigger)
                .unwrap_or_else(|_| point.trigger.clone()),
            point.beta.to_bits(),
        );
        if seen.contains(&key) {
            log::warn!("skipping duplicate ablation config {}", point.label());
            continue;
        }
        seen.push(key);
        let outcome = run_point(registry, clips, base, point);
        let (stats, error) = match outcome {
            Ok(s) => (Some(s), None),
            Err(e) => {
                log::warn!("ablation config {} failed: {e}", point.label());
                (None, Some(e.to_string()))
            }
        };
        rows.push(AblationRow {
            config: point.label(),
            point: point.clone(),
            stats,
            error,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{generate_clip, ClipSpec, MotionSpec};

    fn clip() -> SynthClip {
        let spec = ClipSpec {
            motion: MotionSpec {
                window: Some((4, 5)),
                ..MotionSpec::translation(4.0, 0.0)
            },
            ..ClipSpec::default()
        };
        generate_clip(2, 11, 128, 128, &spec).unwrap()
    }

    #[test]
    fn default_grid_is_two_by_two() {
        let labels: Vec<String> = default_grid().iter().map(AblationPoint::label).collect();
        assert_eq!(
            labels,
            [
                "var/beta=1",
                "var/beta=0.1",
                "periodic=5/beta=1",
                "periodic=5/beta=0.1"
            ]
        );
    }

    #[test]
    fn rows_per_point_with_dedup_and_errors() {
        let r = StrategyRegistry::builtin();
        let grid = vec![
            AblationPoint::new("var", 0.1),
            AblationPoint::new("variation-aware", 0.1),
            AblationPoint::new("periodic=5", 0.1),
            AblationPoint::new("periodic=0", 0.1),
        ];
        let rows = ablate(&r, &[clip()], &SequenceConfig::default(), &grid).unwrap();
        assert_eq!(rows.len(), 3);
        let var = rows[0].stats.as_ref().unwrap();
        let periodic = rows[1].stats.as_ref().unwrap();
        assert!(var.triggers <= periodic.triggers);
        assert_eq!(periodic.triggers, 2);
        assert!(rows[2].stats.is_none() && rows[2].error.is_some());
    }

    #[test]
    fn beta_sets_growth_per_trigger() {
        let r = StrategyRegistry::builtin();
        let grid: Vec<_> = [0.05, 0.10, 1.0]
            .iter()
            .map(|&b| AblationPoint::new("periodic=5", b))
            .collect();
        let rows = ablate(&r, &[clip()], &SequenceConfig::default(), &grid).unwrap();
        // 8×8 grid: 64 initial entries, then two triggers of ⌊β·64⌋
        let sizes: Vec<usize> = rows
            .iter()
            .map(|r| r.stats.as_ref().unwrap().final_memory)
            .collect();
        assert_eq!(sizes, vec![64 + 2 * 3, 64 + 2 * 6, 64 + 2 * 64]);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let r = StrategyRegistry::builtin();
        assert!(matches!(
            ablate(&r, &[clip()], &SequenceConfig::default(), &[]),
            Err(Error::Config(_))
        ));
    }
}
