//! Binary corpus container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "BHCORPUS"
//! version    u32
//! header_len u64
//! header     JSON, header_len bytes: {"records": [{id, material, temperature,
//!            dc_bias, shape, frequency, samples}, ...]}
//! payload    per record: B samples then H samples, f64 each
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::waveform::{ShapeTag, TimeSeries, WaveformRecord};

pub const CORPUS_MAGIC: &[u8; 8] = b"BHCORPUS";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    records: Vec<RecordMeta>,
}

#[derive(Serialize, Deserialize)]
struct RecordMeta {
    id: String,
    material: String,
    temperature: f64,
    dc_bias: f64,
    shape: ShapeTag,
    frequency: f64,
    samples: usize,
}

pub fn encode_corpus(records: &[WaveformRecord]) -> Result<Vec<u8>> {
    let header = Header {
        records: records
            .iter()
            .map(|r| RecordMeta {
                id: r.id().to_owned(),
                material: r.material().to_owned(),
                temperature: r.temperature(),
                dc_bias: r.dc_bias(),
                shape: r.shape(),
                frequency: r.frequency(),
                samples: r.len(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let payload: usize = records.iter().map(|r| 16 * r.len()).sum();
    let mut out = Vec::with_capacity(20 + json.len() + payload);
    out.extend_from_slice(CORPUS_MAGIC);
    out.extend_from_slice(&CORPUS_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for r in records {
        for s in [r.b(), r.h()] {
            for v in s.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_corpus(bytes: &[u8]) -> Result<Vec<WaveformRecord>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != CORPUS_MAGIC {
        return Err(Error::Format("not a corpus file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != CORPUS_VERSION {
        return Err(Error::Format(format!(
            "corpus format version {version} is not supported (expected {CORPUS_VERSION})"
        )));
    }
    let len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(cur.take(len)?).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(header.records.len());
    for m in header.records {
        let mut series = || -> Result<TimeSeries> {
            let vals =
                cur.take(8 * m.samples)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            TimeSeries::new(vals, m.frequency)
        };
        let b = series()?;
        let h = series()?;
        out.push(WaveformRecord::new(m.id, b, h, m.material, m.temperature, m.dc_bias, m.shape)?);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after the last record", bytes.len() - cur.pos)));
    }
    Ok(out)
}

pub fn write_corpus(path: &Path, records: &[WaveformRecord]) -> Result<()> {
    write_atomic(path, &encode_corpus(records)?)
}

pub fn read_corpus(path: &Path) -> Result<Vec<WaveformRecord>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_corpus(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated: needed {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}
