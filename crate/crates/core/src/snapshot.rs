//! Length-prefixed JSON header followed by a raw little-endian payload.
//!
//! Layout: `u64` LE header length, header JSON bytes, payload bytes.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn write_framed<W: Write, H: Serialize>(
    mut out: W,
    header: &H,
    payload: &[u8],
) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    out.write_all(payload)?;
    Ok(())
}

pub(crate) fn read_framed<R: Read, H: DeserializeOwned>(
    mut input: R,
    what: &'static str,
) -> Result<(H, Vec<u8>)> {
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > (1 << 26) {
        return Err(Error::Format {
            what,
            reason: format!("header length {len} is implausible"),
        });
    }
    let mut json = vec![0u8; len as usize];
    input.read_exact(&mut json)?;
    let header = serde_json::from_slice(&json)?;
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    Ok((header, payload))
}

pub(crate) fn push_f32s(buf: &mut Vec<u8>, values: &[f32]) {
    buf.reserve(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Splits `count` little-endian floats off the front of `bytes`.
pub(crate) fn take_f32s<'a>(
    bytes: &'a [u8],
    count: usize,
    what: &'static str,
) -> Result<(Vec<f32>, &'a [u8])> {
    let need = count * 4;
    if bytes.len() < need {
        return Err(Error::Format {
            what,
            reason: format!("payload truncated: need {need} bytes, have {}", bytes.len()),
        });
    }
    let (head, rest) = bytes.split_at(need);
    let values = head
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((values, rest))
}
