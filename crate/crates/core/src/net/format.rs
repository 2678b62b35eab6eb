//! Model file layout:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `BHDSKEW\0` |
//! | 4 | format version, u32 LE |
//! | 8 | header length `n`, u64 LE |
//! | n | UTF-8 JSON header: architecture, normalization, metadata |
//! | 8·count | parameters, f64 LE, in [`ParamLayout`](super::ParamLayout) order |

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, ModelMeta, ModelParams, Normalization, ARCH_TAG};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const MODEL_MAGIC: &[u8; 8] = b"BHDSKEW\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Descriptor {
    tag: String,
    #[serde(flatten)]
    arch: Architecture,
    param_count: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Descriptor,
    normalization: Normalization,
    meta: ModelMeta,
}

pub fn encode_model(p: &ModelParams) -> Result<Vec<u8>> {
    let header = Header {
        architecture: Descriptor { tag: ARCH_TAG.to_string(), arch: *p.arch(), param_count: p.values().len() },
        normalization: p.norm.clone(),
        meta: p.meta.clone(),
    };
    let json =
        serde_json::to_vec_pretty(&header).map_err(|e| Error::Format(format!("cannot encode model header: {e}")))?;
    let mut out = Vec::with_capacity(20 + json.len() + 8 * p.values().len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in p.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    let fail = |m: String| Error::Format(m);
    if bytes.len() < 20 {
        return Err(fail(format!("model file truncated: {} bytes", bytes.len())));
    }
    if &bytes[..8] != MODEL_MAGIC {
        return Err(fail("bad magic: not a model file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(fail(format!("unsupported model version {version} (expected {MODEL_VERSION})")));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let body = &bytes[20..];
    let hlen = usize::try_from(hlen)
        .ok()
        .filter(|&h| h <= body.len())
        .ok_or_else(|| fail(format!("model header truncated: length {hlen} exceeds file")))?;
    let header: Header =
        serde_json::from_slice(&body[..hlen]).map_err(|e| fail(format!("malformed model header: {e}")))?;
    let d = header.architecture;
    if d.tag != ARCH_TAG {
        return Err(fail(format!("unknown architecture tag {:?}", d.tag)));
    }
    d.arch.validate()?;
    let expected = d.arch.param_count();
    if d.param_count != expected {
        return Err(fail(format!("descriptor lists {} parameters but {} implies {expected}", d.param_count, d.arch)));
    }
    let blob = &body[hlen..];
    if blob.len() != expected * 8 {
        let what = if blob.len() < expected * 8 { "truncated" } else { "has trailing bytes" };
        return Err(fail(format!("parameter blob {what}: {} bytes for {expected} parameters", blob.len())));
    }
    let values = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    header.normalization.validate()?;
    let mut p = ModelParams::from_values(d.arch, values)?;
    p.norm = header.normalization;
    p.meta = header.meta;
    Ok(p)
}

pub fn save_model(p: &ModelParams, path: &Path) -> Result<()> {
    write_atomic(path, &encode_model(p)?)
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}
