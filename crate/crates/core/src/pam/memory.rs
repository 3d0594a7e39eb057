use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::encoder::{KeyMap, ValueMap};
use crate::error::{dim_err, Error, Result};
use crate::snapshot::{push_f32s, read_framed, take_f32s, write_framed};

/// Where a memory entry came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub frame: usize,
    pub row: usize,
    pub col: usize,
}

/// Growable array of pixel key/value entries. Entries are only ever appended.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelMemory {
    key_channels: usize,
    value_channels: usize,
    keys: Vec<f32>,
    values: Vec<f32>,
    provenance: Vec<Provenance>,
    cap: Option<usize>,
}

/// Commits every pixel of the first frame, in raster order.
pub fn memory_init(key: &KeyMap, value: &ValueMap) -> Result<PixelMemory> {
    let (h, w, ck) = key.dims3()?;
    let (vh, vw, cv) = value.dims3()?;
    if (h, w) != (vh, vw) {
        return dim_err(format!("key grid {h}×{w} vs value grid {vh}×{vw}"));
    }
    let mut mem = PixelMemory::empty(ck, cv);
    let all: Vec<usize> = (0..h * w).collect();
    mem.append(&all, key, value, 0)?;
    Ok(mem)
}

impl PixelMemory {
    pub fn empty(key_channels: usize, value_channels: usize) -> Self {
        Self {
            key_channels,
            value_channels,
            keys: Vec::new(),
            values: Vec::new(),
            provenance: Vec::new(),
            cap: None,
        }
    }

    /// Appends beyond `cap` entries are rejected whole.
    pub fn with_cap(mut self, cap: Option<usize>) -> Self {
        self.cap = cap;
        self
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn key_channels(&self) -> usize {
        self.key_channels
    }

    pub fn value_channels(&self) -> usize {
        self.value_channels
    }

    /// `k × C_k`, row-major.
    pub fn keys(&self) -> &[f32] {
        &self.keys
    }

    /// `k × C_v`, row-major.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn key(&self, i: usize) -> &[f32] {
        &self.keys[i * self.key_channels..(i + 1) * self.key_channels]
    }

    pub fn value(&self, i: usize) -> &[f32] {
        &self.values[i * self.value_channels..(i + 1) * self.value_channels]
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn keys_mut(&mut self) -> &mut [f32] {
        &mut self.keys
    }

    /// Copies the selected raster-order pixels of `key`/`value` into memory,
    /// in the order given.
    pub fn append(
        &mut self,
        indices: &[usize],
        key: &KeyMap,
        value: &ValueMap,
        frame_index: usize,
    ) -> Result<()> {
        let (h, w, ck) = key.dims3()?;
        let (vh, vw, cv) = value.dims3()?;
        if (h, w) != (vh, vw) {
            return dim_err(format!("key grid {h}×{w} vs value grid {vh}×{vw}"));
        }
        if ck != self.key_channels || cv != self.value_channels {
            return dim_err(format!(
                "entry widths ({ck}, {cv}) do not match memory ({}, {})",
                self.key_channels, self.value_channels
            ));
        }
        let hw = h * w;
        let mut seen = HashSet::with_capacity(indices.len());
        for &i in indices {
            if i >= hw {
                return Err(Error::IndexOutOfRange { index: i, len: hw });
            }
            if !seen.insert(i) {
                return Err(Error::Precondition(format!("duplicate pixel index {i}")));
            }
        }
        if let Some(cap) = self.cap {
            if self.len() + indices.len() > cap {
                return Err(Error::MemoryFull {
                    cap,
                    current: self.len(),
                    requested: indices.len(),
                });
            }
        }
        self.keys.reserve(indices.len() * ck);
        self.values.reserve(indices.len() * cv);
        for &i in indices {
            self.keys
                .extend_from_slice(&key.data()[i * ck..(i + 1) * ck]);
            self.values
                .extend_from_slice(&value.data()[i * cv..(i + 1) * cv]);
            self.provenance.push(Provenance {
                frame: frame_index,
                row: i / w,
                col: i % w,
            });
        }
        Ok(())
    }

    /// Appends raw entries, e.g. to inject synthetic memory for benchmarks.
    pub fn push_entry(&mut self, key: &[f32], value: &[f32], provenance: Provenance) -> Result<()> {
        if key.len() != self.key_channels || value.len() != self.value_channels {
            return dim_err(format!(
                "entry widths ({}, {}) do not match memory ({}, {})",
                key.len(),
                value.len(),
                self.key_channels,
                self.value_channels
            ));
        }
        if self.cap.is_some_and(|cap| self.len() >= cap) {
            return Err(Error::MemoryFull {
                cap: self.cap.unwrap_or_default(),
                current: self.len(),
                requested: 1,
            });
        }
        self.keys.extend_from_slice(key);
        self.values.extend_from_slice(value);
        self.provenance.push(provenance);
        Ok(())
    }

    /// Header JSON `{format, k, key_channels, value_channels}`, then keys and
    /// values as LE `f32`, then provenance as LE `u32` triples.
    pub fn write_snapshot<W: Write>(&self, out: W) -> Result<()> {
        let header = MemoryHeader {
            format: MEMORY_FORMAT.into(),
            k: self.len(),
            key_channels: self.key_channels,
            value_channels: self.value_channels,
        };
        let mut payload =
            Vec::with_capacity((self.keys.len() + self.values.len() + 3 * self.len()) * 4);
        push_f32s(&mut payload, &self.keys);
        push_f32s(&mut payload, &self.values);
        for p in &self.provenance {
            for v in [p.frame, p.row, p.col] {
                payload.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
        write_framed(out, &header, &payload)
    }

    pub fn read_snapshot<R: Read>(input: R) -> Result<Self> {
        const WHAT: &str = "memory snapshot";
        let (header, payload): (MemoryHeader, _) = read_framed(input, WHAT)?;
        if header.format != MEMORY_FORMAT {
            return Err(Error::Format {
                what: WHAT,
                reason: format!("unknown format `{}`", header.format),
            });
        }
        let k = header.k;
        let (keys, rest) = take_f32s(&payload, k * header.key_channels, WHAT)?;
        let (values, rest) = take_f32s(rest, k * header.value_channels, WHAT)?;
        if rest.len() != k * 12 {
            return Err(Error::Format {
                what: WHAT,
                reason: format!("expected {} provenance bytes, got {}", k * 12, rest.len()),
            });
        }
        let u32s: Vec<usize> = rest
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let provenance = u32s
            .chunks_exact(3)
            .map(|t| Provenance {
                frame: t[0],
                row: t[1],
                col: t[2],
            })
            .collect();
        Ok(Self {
            key_channels: header.key_channels,
            value_channels: header.value_channels,
            keys,
            values,
            provenance,
            cap: None,
        })
    }
}

const MEMORY_FORMAT: &str = "pam-memory/1";

#[derive(Serialize, Deserialize)]
struct MemoryHeader {
    format: String,
    k: usize,
    key_channels: usize,
    value_channels: usize,
}
