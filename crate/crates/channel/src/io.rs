//! Cell file: `b"CIR1"`, u32 LE header length, JSON header, then `n_points`
//! interleaved `(re, im)` f64 LE pairs, one per frequency listed in the header.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ChannelError, Result};
use crate::model::{ChannelSweep, SweepMeta};

pub const CIR_MAGIC: &[u8; 4] = b"CIR1";

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    meta: SweepMeta,
    frequencies_hz: Vec<f64>,
}

pub fn write_sweep(path: &Path, sweep: &ChannelSweep) -> Result<()> {
    let n = sweep.h.len();
    let header = Header { meta: sweep.meta.clone(), frequencies_hz: sweep.frequencies.clone() };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + json.len() + 16 * n);
    out.extend_from_slice(CIR_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for c in &sweep.h {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| ChannelError::io(path, e))
}

pub fn read_sweep(path: &Path) -> Result<ChannelSweep> {
    let bytes = fs::read(path).map_err(|e| ChannelError::io(path, e))?;
    if bytes.len() < 8 || &bytes[..4] != CIR_MAGIC {
        return Err(ChannelError::format(path, "missing CIR1 magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = bytes.get(8..8 + hlen).ok_or_else(|| ChannelError::format(path, "truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| ChannelError::format(path, e.to_string()))?;
    let n = header.frequencies_hz.len();
    let payload = &bytes[8 + hlen..];
    if payload.len() != 16 * n {
        return Err(ChannelError::format(path, format!("payload has {} bytes, expected {}", payload.len(), 16 * n)));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    let h = payload.chunks_exact(16).map(|c| Complex64::new(f(&c[..8]), f(&c[8..]))).collect();
    Ok(ChannelSweep {
        frequencies: header.frequencies_hz,
        h,
        meta: header.meta,
    })
}

/// `freq_hz,re,im` rows with a header line.
pub fn sweep_csv(sweep: &ChannelSweep) -> String {
    let mut s = String::from("freq_hz,re,im\n");
    for (f, c) in sweep.frequencies.iter().zip(&sweep.h) {
        writeln!(s, "{f},{},{}", c.re, c.im).unwrap();
    }
    s
}
