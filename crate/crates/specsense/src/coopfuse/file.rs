//! SPCE cooperative-example container: the SPSD framing with magic "SPCE"
//! and per-record payload label u8, snr s16 LE, node count u8, then 2k
//! little-endian f32 probabilities (p0, p1 per node).

use super::{CoopError, CoopExample};
use crate::detectnet::ProbPair;
use crate::sigmod::Hypothesis;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const SPCE_MAGIC: [u8; 4] = *b"SPCE";
pub const SPCE_VERSION: u16 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoopHeader {
    pub split: String,
    pub records: u64,
    pub nodes: u8,
    pub seed: u64,
    pub sample_length: usize,
    pub scheme_ids: Vec<u8>,
    pub snr_grid_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub fn write_coop_dataset(
    path: &Path,
    header: &CoopHeader,
    examples: &[CoopExample],
) -> Result<(), CoopError> {
    if header.records != examples.len() as u64 {
        return Err(CoopError::MalformedFile(format!(
            "header says {} records, got {}",
            header.records,
            examples.len()
        )));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&SPCE_MAGIC)?;
    w.write_all(&SPCE_VERSION.to_le_bytes())?;
    let header_bytes = serde_json::to_vec(header)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for example in examples {
        if example.nodes() != header.nodes as usize {
            return Err(CoopError::NodeCountMismatch {
                expected: header.nodes as usize,
                got: example.nodes(),
            });
        }
        w.write_all(&[example.label as u8])?;
        let snr = example.snr_db.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        w.write_all(&snr.to_le_bytes())?;
        w.write_all(&[header.nodes])?;
        for p in &example.node_probs {
            w.write_all(&(p.p0 as f32).to_le_bytes())?;
            w.write_all(&(p.p1 as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_coop_dataset(path: &Path) -> Result<(CoopHeader, Vec<CoopExample>), CoopError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != SPCE_MAGIC {
        return Err(CoopError::MalformedFile("bad magic".into()));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    if u16::from_le_bytes(v) != SPCE_VERSION {
        return Err(CoopError::MalformedFile("unsupported version".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut header_bytes = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut header_bytes)?;
    let header: CoopHeader = serde_json::from_slice(&header_bytes)?;

    let k = header.nodes as usize;
    let mut examples = Vec::with_capacity(header.records as usize);
    let mut record = vec![0u8; 4 + 8 * k];
    for _ in 0..header.records {
        r.read_exact(&mut record)?;
        let label = match record[0] {
            0 => Hypothesis::H0,
            1 => Hypothesis::H1,
            other => return Err(CoopError::MalformedFile(format!("bad label {other}"))),
        };
        let snr_db = i16::from_le_bytes([record[1], record[2]]) as f64;
        if record[3] as usize != k {
            return Err(CoopError::MalformedFile(format!(
                "record node count {} != header {k}",
                record[3]
            )));
        }
        let mut node_probs = Vec::with_capacity(k);
        for n in 0..k {
            let off = 4 + 8 * n;
            let p0 = f32::from_le_bytes(record[off..off + 4].try_into().unwrap());
            let p1 = f32::from_le_bytes(record[off + 4..off + 8].try_into().unwrap());
            node_probs.push(ProbPair::new(p0 as f64, p1 as f64));
        }
        examples.push(CoopExample {
            node_probs,
            label,
            snr_db,
        });
    }
    Ok((header, examples))
}
