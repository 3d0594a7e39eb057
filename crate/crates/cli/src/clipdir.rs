//! Clip directories: `frame_%04d.ppm`, `mask_%04d.pgm`, optional `clip.json`.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pam_core::evalkit::{ClipSpec, SynthClip};
use pam_core::{Frame, MaskMap};
use serde::{Deserialize, Serialize};

use crate::create_file;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipManifest {
    pub seed: u64,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub spec: ClipSpec,
}

pub struct LoadedClip {
    pub frames: Vec<Frame>,
    pub first_mask: MaskMap,
    /// Present only when every frame has a mask.
    pub gt_masks: Option<Vec<MaskMap>>,
    pub manifest: Option<ClipManifest>,
}

pub fn frame_path(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("frame_{t:04}.ppm"))
}

pub fn mask_path(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("mask_{t:04}.pgm"))
}

pub fn write_clip(dir: &Path, clip: &SynthClip) -> Result<()> {
    for (t, (f, m)) in clip.frames.iter().zip(&clip.gt_masks).enumerate() {
        let mut w = create_file(&frame_path(dir, t))?;
        f.write_ppm(&mut w)?;
        w.flush()?;
        let mut w = create_file(&mask_path(dir, t))?;
        m.write_pgm(&mut w)?;
        w.flush()?;
    }
    let (height, width) = clip.extents();
    let manifest = ClipManifest {
        seed: clip.seed,
        frames: clip.len(),
        height,
        width,
        spec: clip.spec.clone(),
    };
    let mut w = create_file(&dir.join("clip.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_frame(path: &Path) -> Result<Frame> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Frame::read_ppm(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn read_mask(path: &Path) -> Result<MaskMap> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    MaskMap::read_pgm(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

/// Frames are read from index 0 until the first missing file.
pub fn load_clip(dir: &Path) -> Result<LoadedClip> {
    if !dir.is_dir() {
        bail!("clip directory {} does not exist", dir.display());
    }
    let mut frames = Vec::new();
    while frame_path(dir, frames.len()).is_file() {
        frames.push(read_frame(&frame_path(dir, frames.len()))?);
    }
    if frames.is_empty() {
        bail!("missing first frame {}", frame_path(dir, 0).display());
    }
    let first = mask_path(dir, 0);
    if !first.is_file() {
        bail!("missing first mask {}", first.display());
    }
    let first_mask = read_mask(&first)?;
    let gt_masks = if (1..frames.len()).all(|t| mask_path(dir, t).is_file()) {
        let mut masks = vec![first_mask.clone()];
        for t in 1..frames.len() {
            masks.push(read_mask(&mask_path(dir, t))?);
        }
        Some(masks)
    } else {
        None
    };
    let manifest_path = dir.join("clip.json");
    let manifest = if manifest_path.is_file() {
        let text = fs::read_to_string(&manifest_path)?;
        Some(
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", manifest_path.display()))?,
        )
    } else {
        None
    };
    Ok(LoadedClip {
        frames,
        first_mask,
        gt_masks,
        manifest,
    })
}
