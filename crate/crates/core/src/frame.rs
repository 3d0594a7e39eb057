//! RGB frames, binary masks and their binary PPM/PGM encodings.

use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{dim_err, Error, Result};
use crate::tensor::Tensor;

/// 8-bit RGB image, row-major, interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || rgb.len() != width * height * 3 {
            return dim_err(format!(
                "frame {width}×{height} needs {} bytes, got {}",
                width * height * 3,
                rgb.len()
            ));
        }
        Ok(Self { width, height, rgb })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let rgb = color
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self { width, height, rgb }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, color: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    /// `H×W×3` tensor with values in `[0, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.rgb.iter().map(|&v| v as f32 / 255.0).collect();
        Tensor::new(vec![self.height, self.width, 3], data).expect("frame extents are valid")
    }

    pub fn write_ppm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.rgb)?;
        Ok(())
    }

    pub fn read_ppm<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        let (w, h, payload) = parse_netpbm(&buf, b"P6", 3)?;
        Self::new(w, h, payload.to_vec())
    }
}

/// Binary object mask at frame resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskMap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl MaskMap {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return dim_err(format!(
                "mask {width}×{height} needs {} pixels, got {}",
                width * height,
                bits.len()
            ));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (y, x)))
            .map(|(y, x)| f(y, x))
            .collect();
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `H×W×1` tensor of 0.0 / 1.0.
    pub fn to_tensor(&self) -> Tensor {
        let data = self
            .bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        Tensor::new(vec![self.height, self.width, 1], data).expect("mask extents are valid")
    }

    /// Mask pixels are stored as 0 / 255.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        out.write_all(&bytes)?;
        Ok(())
    }

    /// Any value ≥ 128 is foreground.
    pub fn read_pgm<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        let (w, h, payload) = parse_netpbm(&buf, b"P5", 1)?;
        Self::new(w, h, payload.iter().map(|&v| v >= 128).collect())
    }

    /// Run lengths of alternating background/foreground, starting with background.
    pub fn to_runs(&self) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in &self.bits {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_runs(width: usize, height: usize, runs: &[u32]) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        let mut value = false;
        for &r in runs {
            bits.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        Self::new(width, height, bits)
    }
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    width: usize,
    height: usize,
    runs: Vec<u32>,
}

impl Serialize for MaskMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MaskRepr {
            width: self.width,
            height: self.height,
            runs: self.to_runs(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MaskMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MaskRepr::deserialize(d)?;
        MaskMap::from_runs(r.width, r.height, &r.runs).map_err(serde::de::Error::custom)
    }
}

fn parse_netpbm<'a>(
    buf: &'a [u8],
    magic: &[u8],
    channels: usize,
) -> Result<(usize, usize, &'a [u8])> {
    let what = if channels == 3 { "PPM" } else { "PGM" };
    let bad = |reason: String| Error::Format { what, reason };
    if !buf.starts_with(magic) {
        return Err(bad("bad magic number".into()));
    }
    let mut pos = magic.len();
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and `#` comments between header tokens
        loop {
            match buf.get(pos) {
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while buf.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while buf.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&buf[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad header field at byte {start}")))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(bad(format!("maxval {maxval} unsupported")));
    }
    if !buf.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing separator after header".into()));
    }
    pos += 1;
    let need = w * h * channels;
    let payload = &buf[pos..];
    if payload.len() != need {
        return Err(bad(format!(
            "expected {need} payload bytes, got {}",
            payload.len()
        )));
    }
    Ok((w, h, payload))
}
