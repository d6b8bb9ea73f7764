//! SPSD dataset container.
//!
//! Layout: magic "SPSD", version u16 LE, header length u32 LE, UTF-8 JSON
//! header, then fixed-size records. Each record is label u8, modulation id
//! u8 (255 = none), snr_db s16 LE, and sample_length little-endian f32 pairs
//! (I, Q interleaved).

use super::{DatasetSpec, Hypothesis, LabeledFrame, ModScheme, SigmodError};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const SPSD_MAGIC: [u8; 4] = *b"SPSD";
pub const SPSD_VERSION: u16 = 1;

const MOD_ID_NONE: u8 = 255;

/// JSON header stored after the fixed preamble.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetHeader {
    pub split: String,
    pub records: u64,
    pub seed: u64,
    pub sample_length: usize,
    pub samples_per_symbol: usize,
    pub scheme_ids: Vec<u8>,
    pub snr_grid_db: Vec<f64>,
    pub counts: [u64; 3],
    pub positive_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl DatasetHeader {
    pub fn for_split(spec: &DatasetSpec, split: &str, records: usize) -> Self {
        DatasetHeader {
            split: split.to_string(),
            records: records as u64,
            seed: spec.seed,
            sample_length: spec.sample_length,
            samples_per_symbol: spec.samples_per_symbol,
            scheme_ids: spec.schemes.iter().map(|s| s.id()).collect(),
            snr_grid_db: spec.snr_grid_db.clone(),
            counts: [
                spec.counts.0 as u64,
                spec.counts.1 as u64,
                spec.counts.2 as u64,
            ],
            positive_fraction: spec.positive_fraction,
            config_hash: None,
        }
    }

    /// Reconstruct the generating spec recorded in this header.
    pub fn spec(&self) -> Result<DatasetSpec, SigmodError> {
        let schemes = self
            .scheme_ids
            .iter()
            .map(|&id| {
                ModScheme::from_id(id)
                    .ok_or_else(|| SigmodError::MalformedFile(format!("unknown scheme id {id}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DatasetSpec {
            schemes,
            sample_length: self.sample_length,
            samples_per_symbol: self.samples_per_symbol,
            snr_grid_db: self.snr_grid_db.clone(),
            counts: (
                self.counts[0] as usize,
                self.counts[1] as usize,
                self.counts[2] as usize,
            ),
            positive_fraction: self.positive_fraction,
            seed: self.seed,
        })
    }
}

/// Write one split to `path`.
pub fn write_dataset(
    path: &Path,
    header: &DatasetHeader,
    frames: &[LabeledFrame],
) -> Result<(), SigmodError> {
    if header.records != frames.len() as u64 {
        return Err(SigmodError::InvalidParameter(format!(
            "header says {} records, got {} frames",
            header.records,
            frames.len()
        )));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&SPSD_MAGIC)?;
    w.write_all(&SPSD_VERSION.to_le_bytes())?;
    let header_bytes = serde_json::to_vec(header)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for frame in frames {
        if frame.samples.len() != header.sample_length {
            return Err(SigmodError::InvalidParameter(format!(
                "frame length {} != header sample_length {}",
                frame.samples.len(),
                header.sample_length
            )));
        }
        w.write_all(&[frame.label as u8])?;
        w.write_all(&[frame.scheme.map_or(MOD_ID_NONE, |s| s.id())])?;
        let snr = frame.snr_db.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        w.write_all(&snr.to_le_bytes())?;
        for &(i, q) in &frame.samples {
            w.write_all(&i.to_le_bytes())?;
            w.write_all(&q.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read one split back.
pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<LabeledFrame>), SigmodError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != SPSD_MAGIC {
        return Err(SigmodError::MalformedFile("bad magic".into()));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    let version = u16::from_le_bytes(v);
    if version != SPSD_VERSION {
        return Err(SigmodError::MalformedFile(format!(
            "unsupported version {version}"
        )));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let header_len = u32::from_le_bytes(len) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: DatasetHeader = serde_json::from_slice(&header_bytes)?;

    let n = header.sample_length;
    let mut frames = Vec::with_capacity(header.records as usize);
    let mut record = vec![0u8; 4 + 8 * n];
    for _ in 0..header.records {
        r.read_exact(&mut record)?;
        let label = match record[0] {
            0 => Hypothesis::H0,
            1 => Hypothesis::H1,
            other => {
                return Err(SigmodError::MalformedFile(format!("bad label {other}")));
            }
        };
        let scheme = match record[1] {
            MOD_ID_NONE => None,
            id => Some(ModScheme::from_id(id).ok_or_else(|| {
                SigmodError::MalformedFile(format!("unknown scheme id {id}"))
            })?),
        };
        if (label == Hypothesis::H0) != scheme.is_none() {
            return Err(SigmodError::MalformedFile(
                "label/scheme inconsistency".into(),
            ));
        }
        let snr_db = i16::from_le_bytes([record[2], record[3]]) as f64;
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let off = 4 + 8 * k;
            let i = f32::from_le_bytes(record[off..off + 4].try_into().unwrap());
            let q = f32::from_le_bytes(record[off + 4..off + 8].try_into().unwrap());
            samples.push((i, q));
        }
        frames.push(LabeledFrame {
            label,
            scheme,
            snr_db,
            samples,
        });
    }
    Ok((header, frames))
}
