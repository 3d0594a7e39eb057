//! Seeded synthetic clips: one convex sprite moving under an affine motion
//! model over a static, low-amplitude noise background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::check_divisible;
use crate::error::{Error, Result};
use crate::frame::{Frame, MaskMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpriteShape {
    Square {
        side: f32,
    },
    /// Regular polygon with `sides` vertices on a circle of `radius`.
    Regular {
        sides: usize,
        radius: f32,
    },
    /// Convex polygon, vertices relative to the sprite centre.
    Polygon {
        vertices: Vec<[f32; 2]>,
    },
}

impl SpriteShape {
    fn vertices(&self) -> Result<Vec<[f32; 2]>> {
        let v = match self {
            SpriteShape::Square { side } => {
                let r = side / 2.0;
                vec![[-r, -r], [r, -r], [r, r], [-r, r]]
            }
            SpriteShape::Regular { sides, radius } => {
                if *sides < 3 {
                    return Err(Error::Config("regular polygon needs ≥ 3 sides".into()));
                }
                (0..*sides)
                    .map(|i| {
                        let a = std::f32::consts::TAU * i as f32 / *sides as f32;
                        [radius * a.cos(), radius * a.sin()]
                    })
                    .collect()
            }
            SpriteShape::Polygon { vertices } => vertices.clone(),
        };
        if v.len() < 3 {
            return Err(Error::Config("sprite polygon needs ≥ 3 vertices".into()));
        }
        Ok(v)
    }
}

/// Per-step affine motion. A step happens on every frame inside `window`
/// (inclusive, 0-based), or on every frame after the first when unset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    pub translate: [f32; 2],
    pub rotate_deg: f32,
    /// Multiplicative scale per step.
    pub scale: f32,
    /// Horizontal shear added per step.
    pub shear: f32,
    pub window: Option<(usize, usize)>,
}

impl MotionSpec {
    pub fn still() -> Self {
        Self {
            translate: [0.0, 0.0],
            rotate_deg: 0.0,
            scale: 1.0,
            shear: 0.0,
            window: None,
        }
    }

    pub fn translation(dx: f32, dy: f32) -> Self {
        Self {
            translate: [dx, dy],
            ..Self::still()
        }
    }

    fn steps_until(&self, frame: usize) -> usize {
        match self.window {
            None => frame,
            Some((a, b)) => (1..=frame).filter(|f| (a..=b).contains(f)).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub shape: SpriteShape,
    pub color: [u8; 3],
    /// Sprite centre `(x, y)` on frame 0; the image centre when unset.
    pub start: Option<[f32; 2]>,
    pub motion: MotionSpec,
    pub background: [u8; 3],
    /// Background noise amplitude, uniform in `±noise` per channel.
    pub noise: u8,
}

impl Default for ClipSpec {
    fn default() -> Self {
        Self {
            shape: SpriteShape::Square { side: 64.0 },
            color: [220, 40, 40],
            start: None,
            motion: MotionSpec::translation(4.0, 0.0),
            background: [120, 120, 120],
            noise: 8,
        }
    }
}

pub const DEFAULT_CLIP_LEN: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthClip {
    pub seed: u64,
    pub spec: ClipSpec,
    pub frames: Vec<Frame>,
    pub gt_masks: Vec<MaskMap>,
}

impl SynthClip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn extents(&self) -> (usize, usize) {
        self.frames[0].extents()
    }
}

pub fn generate_clip(
    seed: u64,
    len: usize,
    height: usize,
    width: usize,
    spec: &ClipSpec,
) -> Result<SynthClip> {
    if len == 0 {
        return Err(Error::Config("clip needs at least one frame".into()));
    }
    check_divisible(height, width, 16)?;
    let base = spec.shape.vertices()?;
    let background = noise_background(seed, height, width, spec);
    let start = spec
        .start
        .unwrap_or([width as f32 / 2.0, height as f32 / 2.0]);

    let mut frames = Vec::with_capacity(len);
    let mut gt_masks = Vec::with_capacity(len);
    for t in 0..len {
        let poly = place(&base, start, &spec.motion, t, height, width);
        let mask = rasterize(&poly, height, width);
        let mut frame = background.clone();
        for y in 0..height {
            for x in 0..width {
                if mask.get(y, x) {
                    frame.set_pixel(y, x, spec.color);
                }
            }
        }
        frames.push(frame);
        gt_masks.push(mask);
    }
    Ok(SynthClip {
        seed,
        spec: spec.clone(),
        frames,
        gt_masks,
    })
}

fn noise_background(seed: u64, height: usize, width: usize, spec: &ClipSpec) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.noise as i16;
    let rgb = (0..height * width)
        .flat_map(|_| spec.background)
        .map(|c| {
            let jitter = if n > 0 { rng.gen_range(-n..=n) } else { 0 };
            (c as i16 + jitter).clamp(0, 255) as u8
        })
        .collect();
    Frame::new(width, height, rgb).expect("extents checked")
}

/// Sprite vertices on frame `t`: shear, scale, rotate, then translate; the
/// result is shifted back inside the image if the motion would leave it.
fn place(
    base: &[[f32; 2]],
    start: [f32; 2],
    motion: &MotionSpec,
    t: usize,
    height: usize,
    width: usize,
) -> Vec<[f32; 2]> {
    let n = motion.steps_until(t) as f32;
    let shear = motion.shear * n;
    let scale = motion.scale.powf(n);
    let (sin, cos) = (motion.rotate_deg * n).to_radians().sin_cos();
    let cx = start[0] + motion.translate[0] * n;
    let cy = start[1] + motion.translate[1] * n;
    let mut pts: Vec<[f32; 2]> = base
        .iter()
        .map(|&[x, y]| {
            let (x, y) = ((x + shear * y) * scale, y * scale);
            [cx + cos * x - sin * y, cy + sin * x + cos * y]
        })
        .collect();
    let clamp_shift = |lo: f32, hi: f32, extent: f32| {
        if lo < 0.0 {
            -lo
        } else if hi > extent {
            (extent - hi).max(-lo)
        } else {
            0.0
        }
    };
    let (minx, maxx) = bounds(pts.iter().map(|p| p[0]));
    let (miny, maxy) = bounds(pts.iter().map(|p| p[1]));
    let dx = clamp_shift(minx, maxx, width as f32);
    let dy = clamp_shift(miny, maxy, height as f32);
    for p in &mut pts {
        p[0] += dx;
        p[1] += dy;
    }
    pts
}

fn bounds(values: impl Iterator<Item = f32>) -> (f32, f32) {
    values.fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Pixels whose centre lies strictly inside the convex polygon.
fn rasterize(poly: &[[f32; 2]], height: usize, width: usize) -> MaskMap {
    let (minx, maxx) = bounds(poly.iter().map(|p| p[0]));
    let (miny, maxy) = bounds(poly.iter().map(|p| p[1]));
    let x0 = (minx.floor().max(0.0)) as usize;
    let x1 = (maxx.ceil().max(0.0) as usize).min(width);
    let y0 = (miny.floor().max(0.0)) as usize;
    let y1 = (maxy.ceil().max(0.0) as usize).min(height);
    let mut mask = MaskMap::empty(width, height);
    for y in y0..y1 {
        for x in x0..x1 {
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            let mut pos = true;
            let mut neg = true;
            for (i, a) in poly.iter().enumerate() {
                let b = poly[(i + 1) % poly.len()];
                let cross = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
                pos &= cross > 0.0;
                neg &= cross < 0.0;
            }
            if pos || neg {
                mask.set(y, x, true);
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centroid_x(m: &MaskMap) -> f64 {
        let mut sum = 0.0;
        let mut n = 0.0;
        for y in 0..m.height() {
            for x in 0..m.width() {
                if m.get(y, x) {
                    sum += x as f64 + 0.5;
                    n += 1.0;
                }
            }
        }
        sum / n
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = ClipSpec::default();
        let a = generate_clip(3, 4, 64, 96, &spec).unwrap();
        let b = generate_clip(3, 4, 64, 96, &spec).unwrap();
        assert_eq!(a, b);
        let c = generate_clip(4, 4, 64, 96, &spec).unwrap();
        assert_ne!(a.frames[0], c.frames[0]);
    }

    #[test]
    fn still_sprite_gives_identical_frames() {
        let spec = ClipSpec {
            motion: MotionSpec::still(),
            ..ClipSpec::default()
        };
        let clip = generate_clip(1, 5, 128, 128, &spec).unwrap();
        assert!(clip.frames.windows(2).all(|f| f[0] == f[1]));
        assert!(clip.gt_masks.windows(2).all(|m| m[0] == m[1]));
    }

    #[test]
    fn translation_advances_centroid() {
        let clip = generate_clip(2, 6, 128, 256, &ClipSpec::default()).unwrap();
        let xs: Vec<f64> = clip.gt_masks.iter().map(centroid_x).collect();
        for pair in xs.windows(2) {
            assert!((pair[1] - pair[0] - 4.0).abs() <= 0.5, "{xs:?}");
        }
        assert_eq!(clip.gt_masks[0].area(), 64 * 64);
    }

    #[test]
    fn sprite_pixels_match_mask_exactly() {
        let spec = ClipSpec {
            shape: SpriteShape::Regular {
                sides: 6,
                radius: 30.0,
            },
            motion: MotionSpec {
                translate: [3.0, -2.0],
                rotate_deg: 7.0,
                scale: 1.03,
                shear: 0.02,
                window: None,
            },
            ..ClipSpec::default()
        };
        let clip = generate_clip(9, 5, 128, 128, &spec).unwrap();
        for (f, m) in clip.frames.iter().zip(&clip.gt_masks) {
            for y in 0..128 {
                for x in 0..128 {
                    assert_eq!(f.pixel(y, x) == spec.color, m.get(y, x));
                }
            }
        }
    }

    #[test]
    fn motion_is_clamped_inside_the_frame() {
        let spec = ClipSpec {
            motion: MotionSpec::translation(40.0, 0.0),
            ..ClipSpec::default()
        };
        let clip = generate_clip(0, 8, 128, 128, &spec).unwrap();
        let last = clip.gt_masks.last().unwrap();
        assert_eq!(last.area(), 64 * 64);
        assert!((0..128).any(|y| last.get(y, 127)));
    }

    #[test]
    fn window_limits_motion() {
        let spec = ClipSpec {
            motion: MotionSpec {
                window: Some((2, 3)),
                ..MotionSpec::translation(4.0, 0.0)
            },
            ..ClipSpec::default()
        };
        let clip = generate_clip(0, 6, 128, 128, &spec).unwrap();
        let m = &clip.gt_masks;
        assert_eq!(m[0], m[1]);
        assert_ne!(m[1], m[2]);
        assert_ne!(m[2], m[3]);
        assert_eq!(m[3], m[4]);
        assert_eq!(m[4], m[5]);
    }

    #[test]
    fn rejects_bad_extents() {
        assert!(generate_clip(0, 5, 100, 128, &ClipSpec::default()).is_err());
        assert!(generate_clip(0, 0, 128, 128, &ClipSpec::default()).is_err());
    }
}
