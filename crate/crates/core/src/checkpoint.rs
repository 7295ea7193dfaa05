//! Binary checkpoint format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CCNN"
//! 4       4     format version, u32 little-endian (currently 1)
//! 8       4     header length H, u32 little-endian
//! 12      H     UTF-8 JSON header (architecture, tensor table, metadata)
//! 12+H    4·V   payload: f32 little-endian values
//! ```
//!
//! The payload concatenates tensors in this order, each row-major:
//! for blocks 1..3 `conv.weight, conv.bias, bn.gamma, bn.beta,
//! bn.running_mean, bn.running_var`, then `fc1.weight, fc1.bias,
//! fc2.weight, fc2.bias`. The header's tensor table repeats names and shapes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Architecture, CcnnModel};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"CCNN";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"CCNN\"")]
    BadMagic(Vec<u8>),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated {section}: expected {expected} bytes, found {found}")]
    Truncated {
        section: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("model error: {0}")]
    Model(#[from] crate::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    /// Learnable values (excludes running statistics).
    pub parameter_count: usize,
    /// Values in the payload.
    pub stored_values: usize,
    pub tensors: Vec<TensorEntry>,
    pub rng_seed: Option<u64>,
    /// Free-form training metadata (epochs, recipe, ...).
    #[serde(default)]
    pub training: serde_json::Value,
}

fn stored_tensors(model: &CcnnModel) -> Vec<(String, &Tensor)> {
    let mut out = Vec::new();
    for (i, (conv, bn)) in model.convs.iter().zip(&model.norms).enumerate() {
        let b = i + 1;
        out.push((format!("conv{b}.weight"), &conv.weight));
        out.push((format!("conv{b}.bias"), &conv.bias));
        out.push((format!("bn{b}.gamma"), &bn.gamma));
        out.push((format!("bn{b}.beta"), &bn.beta));
        out.push((format!("bn{b}.running_mean"), &bn.running_mean));
        out.push((format!("bn{b}.running_var"), &bn.running_var));
    }
    out.push(("fc1.weight".into(), &model.fc1.weight));
    out.push(("fc1.bias".into(), &model.fc1.bias));
    out.push(("fc2.weight".into(), &model.fc2.weight));
    out.push(("fc2.bias".into(), &model.fc2.bias));
    out
}

fn stored_tensors_mut(model: &mut CcnnModel) -> Vec<&mut Tensor> {
    let mut out = Vec::new();
    for (conv, bn) in model.convs.iter_mut().zip(model.norms.iter_mut()) {
        out.extend([
            &mut conv.weight,
            &mut conv.bias,
            &mut bn.gamma,
            &mut bn.beta,
            &mut bn.running_mean,
            &mut bn.running_var,
        ]);
    }
    out.extend([
        &mut model.fc1.weight,
        &mut model.fc1.bias,
        &mut model.fc2.weight,
        &mut model.fc2.bias,
    ]);
    out
}

pub fn header_for(model: &CcnnModel, rng_seed: Option<u64>, training: serde_json::Value) -> CheckpointHeader {
    let tensors = stored_tensors(model);
    CheckpointHeader {
        architecture: model.architecture().clone(),
        parameter_count: model.parameter_count(),
        stored_values: tensors.iter().map(|(_, t)| t.len()).sum(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        rng_seed,
        training,
    }
}

/// Serializes `model` into checkpoint bytes.
pub fn encode(model: &CcnnModel, rng_seed: Option<u64>, training: serde_json::Value) -> Vec<u8> {
    let header = header_for(model, rng_seed, training);
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + 4 * header.stored_values);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in stored_tensors(model) {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &'a [u8], at: usize, len: usize, section: &'static str) -> Result<&'a [u8], CheckpointError> {
    bytes.get(at..at + len).ok_or(CheckpointError::Truncated {
        section,
        expected: len,
        found: bytes.len().saturating_sub(at),
    })
}

/// Parses checkpoint bytes back into a model (in eval mode) and its header.
pub fn decode(bytes: &[u8]) -> Result<(CcnnModel, CheckpointHeader), CheckpointError> {
    let magic = take(bytes, 0, 4, "magic")?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic.to_vec()));
    }
    let version = u32::from_le_bytes(take(bytes, 4, 4, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let header_len = u32::from_le_bytes(take(bytes, 8, 4, "header length")?.try_into().unwrap()) as usize;
    let header: CheckpointHeader = serde_json::from_slice(take(bytes, 12, header_len, "header")?)
        .map_err(|e| CheckpointError::Header(e.to_string()))?;

    let mut model = CcnnModel::zeros(header.architecture.clone())?;
    let expected = header_for(&model, None, serde_json::Value::Null);
    if expected.tensors != header.tensors || expected.stored_values != header.stored_values {
        return Err(CheckpointError::Header(
            "tensor table does not match the declared architecture".into(),
        ));
    }
    let payload = &bytes[12 + header_len..];
    let needed = 4 * header.stored_values;
    if payload.len() < needed {
        return Err(CheckpointError::Truncated {
            section: "payload",
            expected: needed,
            found: payload.len(),
        });
    }
    let mut values = payload[..needed]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    for t in stored_tensors_mut(&mut model) {
        for v in t.data_mut() {
            *v = values.next().expect("length checked");
        }
    }
    model.set_mode(crate::Mode::Eval);
    Ok((model, header))
}

pub fn save_checkpoint(
    model: &CcnnModel,
    path: &Path,
    rng_seed: Option<u64>,
    training: serde_json::Value,
) -> Result<(), CheckpointError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    file.write_all(&encode(model, rng_seed, training))?;
    file.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CcnnModel, CheckpointHeader), CheckpointError> {
    decode(&fs::read(path)?)
}
