//! Side-by-side SNR-wall table: analytic energy-detector wall (EDW) versus
//! the trained detector's empirical wall (DLW) per sample length.

use super::curve::estimate_snr_wall;
use super::HarnessError;
use crate::detectnet::DetectionCurve;
use crate::endet::{snr_wall, SampleBudget, SnrWall, WallQuery};

/// One report input: a sample length, the detector's observed false-alarm
/// rate, and optionally its measured detection curve.
#[derive(Debug, Clone)]
pub struct WallEntry<'a> {
    pub sample_length: usize,
    pub pf_observed: f64,
    pub curve: Option<&'a DetectionCurve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallRow {
    pub pf: f64,
    pub sample_length: usize,
    /// Analytic energy-detector wall (dB) at the observed pf, M infinite.
    pub edw_db: f64,
    /// Empirical wall of the learned detector, when a curve was supplied
    /// and the target detection rate is sustained somewhere on it.
    pub dlw_db: Option<f64>,
    /// edw - dlw.
    pub improvement_db: Option<f64>,
}

/// Build the report. The EDW column is pure closed-form arithmetic and
/// never touches the curves.
pub fn wall_report(entries: &[WallEntry], pd_target: f64) -> Result<Vec<WallRow>, HarnessError> {
    if !(pd_target > 0.0 && pd_target < 1.0) {
        return Err(HarnessError::Config(format!(
            "pd_target {pd_target} outside (0, 1)"
        )));
    }
    entries
        .iter()
        .map(|entry| {
            let edw = snr_wall(&WallQuery {
                pf_target: entry.pf_observed,
                pd_target,
                n_samples: entry.sample_length,
                m_samples: SampleBudget::Infinite,
            })?;
            let edw_db = match edw {
                SnrWall::Db(v) => v,
                SnrWall::NoWall => {
                    return Err(HarnessError::Config(format!(
                        "no energy-detector wall exists for pf {} / pd {} at N {}",
                        entry.pf_observed, pd_target, entry.sample_length
                    )))
                }
            };
            let dlw_db = entry
                .curve
                .and_then(|curve| estimate_snr_wall(curve, pd_target));
            Ok(WallRow {
                pf: entry.pf_observed,
                sample_length: entry.sample_length,
                edw_db,
                dlw_db,
                improvement_db: dlw_db.map(|dlw| edw_db - dlw),
            })
        })
        .collect()
}

/// Plain-text table for terminal output.
pub fn format_wall_table(rows: &[WallRow]) -> String {
    let mut out = String::from("pf(%)    N      EDW(dB)   DLW(dB)   improvement(dB)\n");
    for row in rows {
        let dlw = row
            .dlw_db
            .map_or("    -".to_string(), |v| format!("{v:9.2}"));
        let imp = row
            .improvement_db
            .map_or("    -".to_string(), |v| format!("{v:9.2}"));
        out.push_str(&format!(
            "{:<8.2} {:<6} {:9.2} {dlw} {imp}\n",
            row.pf * 100.0,
            row.sample_length,
            row.edw_db
        ));
    }
    out
}
