//! Detection-curve CSV emission/parsing and empirical SNR-wall estimation.
//!
//! CSV schema: `detector,snr_db,pd,pf,n_pos,n_neg`, one row per curve point
//! with the aggregate pf and n_neg replicated on every row. Leading lines
//! starting with `#` carry metadata (config hash, seed) and are ignored by
//! the parser. Floats print in Rust's shortest round-trip form, so
//! parse(emit(curve)) reproduces the curve exactly.

use super::HarnessError;
use crate::detectnet::{CurvePoint, DetectionCurve};
use std::path::Path;

pub const CSV_HEADER: &str = "detector,snr_db,pd,pf,n_pos,n_neg";

/// Render curves to CSV text with optional leading metadata comments.
pub fn emit_csv(curves: &[&DetectionCurve], comments: &[(String, String)]) -> String {
    let mut out = String::new();
    for (key, value) in comments {
        out.push_str(&format!("# {key}={value}\n"));
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for curve in curves {
        for p in &curve.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                curve.detector_id, p.snr_db, p.pd, curve.pf, p.n_pos, curve.n_neg
            ));
        }
    }
    out
}

/// Parse CSV text back into curves; consecutive rows sharing a detector id
/// form one curve.
pub fn parse_csv(text: &str) -> Result<Vec<DetectionCurve>, HarnessError> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Csv("empty file".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(HarnessError::Csv(format!(
            "bad header {header:?}, expected {CSV_HEADER:?}"
        )));
    }
    let mut curves: Vec<DetectionCurve> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(HarnessError::Csv(format!(
                "line {}: expected 6 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| HarnessError::Csv(format!("line {}: bad {what}", lineno + 2));
        let detector = fields[0].to_string();
        let snr_db: f64 = fields[1].parse().map_err(|_| bad("snr_db"))?;
        let pd: f64 = fields[2].parse().map_err(|_| bad("pd"))?;
        let pf: f64 = fields[3].parse().map_err(|_| bad("pf"))?;
        let n_pos: usize = fields[4].parse().map_err(|_| bad("n_pos"))?;
        let n_neg: usize = fields[5].parse().map_err(|_| bad("n_neg"))?;
        if !(0.0..=1.0).contains(&pd) || !(0.0..=1.0).contains(&pf) {
            return Err(bad("probability out of [0, 1]"));
        }
        let point = CurvePoint { snr_db, pd, n_pos };
        match curves.last_mut() {
            Some(current) if current.detector_id == detector => {
                if current.pf != pf || current.n_neg != n_neg {
                    return Err(bad("pf/n_neg differ within one curve"));
                }
                if current.points.last().is_some_and(|p| p.snr_db >= snr_db) {
                    return Err(bad("snr_db not strictly increasing"));
                }
                current.points.push(point);
            }
            _ => curves.push(DetectionCurve {
                detector_id: detector,
                pf,
                n_neg,
                points: vec![point],
            }),
        }
    }
    Ok(curves)
}

pub fn write_csv(
    path: &Path,
    curves: &[&DetectionCurve],
    comments: &[(String, String)],
) -> Result<(), HarnessError> {
    std::fs::write(path, emit_csv(curves, comments))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<DetectionCurve>, HarnessError> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Empirical SNR-wall: the smallest SNR at which the linearly interpolated
/// Pd crosses `pd_target` with Pd at or above target on every grid point
/// past the crossing. `None` when the target is never sustained. A curve
/// that sits at or above target everywhere returns its lowest grid point.
pub fn estimate_snr_wall(curve: &DetectionCurve, pd_target: f64) -> Option<f64> {
    debug_assert!(pd_target > 0.0 && pd_target < 1.0);
    let pts = &curve.points;
    if pts.is_empty() {
        return None;
    }
    // Last grid point still below target; everything after is sustained.
    let last_below = pts.iter().rposition(|p| p.pd < pd_target);
    match last_below {
        None => Some(pts[0].snr_db),
        Some(j) if j + 1 == pts.len() => None,
        Some(j) => {
            let (a, b) = (&pts[j], &pts[j + 1]);
            Some(a.snr_db + (pd_target - a.pd) * (b.snr_db - a.snr_db) / (b.pd - a.pd))
        }
    }
}
