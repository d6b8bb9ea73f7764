//! End-to-end experiment execution: generate, train, evaluate, all stamped
//! with the config hash and fully reproducible from the seed.

use super::config::ExperimentConfig;
use super::curve::{estimate_snr_wall, write_csv};
use super::HarnessError;
use crate::coopfuse::{Scn, ScnConfig};
use crate::detectnet::{
    build, train_stage1, train_stage2, DetectNet, DetectNetConfig, DetectionCurve, EpochMetrics,
    Snapshot,
};
use crate::endet::{cfar_threshold, energy_statistic};
use crate::sigmod::{
    synth_dataset, synth_frame_parts, write_dataset, DatasetBundle, DatasetHeader, Hypothesis,
    Split,
};
use crate::tensornet::{load_checkpoint, save_checkpoint, Scalar};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

/// A failure with the pipeline stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed: {source}")]
pub struct ExperimentError {
    pub stage: &'static str,
    #[source]
    pub source: HarnessError,
}

fn at(stage: &'static str) -> impl Fn(HarnessError) -> ExperimentError {
    move |source| ExperimentError { stage, source }
}

/// Everything a completed experiment produced.
#[derive(Debug)]
pub struct ExperimentArtifacts {
    pub config_hash: String,
    pub dataset_paths: [PathBuf; 3],
    pub dataset_sha256: [String; 3],
    pub checkpoint_path: PathBuf,
    pub curve_path: PathBuf,
    pub epoch_log_path: PathBuf,
    pub summary_path: PathBuf,
    /// Validation loss of the freshly built model before any training.
    pub epoch0_val_loss: f64,
    pub stage1_epochs: u32,
    pub stage2_epochs: u32,
    pub stage2_in_interval: bool,
    pub final_metrics: EpochMetrics,
    pub curve: DetectionCurve,
    pub wall_estimate_db: Option<f64>,
}

pub fn sha256_file(path: &Path) -> Result<String, HarnessError> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Generate the three splits and write them as SPSD files stamped with the
/// config hash. Returns the in-memory bundle alongside paths and digests.
pub fn generate_datasets(
    config: &ExperimentConfig,
) -> Result<(DatasetBundle, [PathBuf; 3], [String; 3]), HarnessError> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let spec = config.dataset_spec();
    let bundle = synth_dataset(&spec)?;
    let hash = config.hash();
    let mut paths = Vec::new();
    let mut digests = Vec::new();
    for split in Split::ALL {
        let frames = bundle.split(split);
        let mut header = DatasetHeader::for_split(&spec, split.name(), frames.len());
        header.config_hash = Some(hash.clone());
        let path = config.dataset_path(split.name());
        write_dataset(&path, &header, frames)?;
        digests.push(sha256_file(&path)?);
        paths.push(path);
    }
    Ok((
        bundle,
        paths.try_into().expect("three splits"),
        digests.try_into().expect("three digests"),
    ))
}

#[derive(Serialize)]
struct Summary<'a> {
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_stage: Option<&'a str>,
    config_hash: &'a str,
    seed: u64,
    reference_precision: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset_sha256: Option<&'a [String; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epoch0_val_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage1_epochs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage2_epochs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage2_in_interval: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_pf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_estimate_db: Option<f64>,
}

/// Run generate -> train -> evaluate. On failure a summary marking the
/// incomplete stage is still written (best effort) before the error
/// propagates.
pub fn run_experiment(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&str),
) -> Result<ExperimentArtifacts, ExperimentError> {
    let result = if config.reference_precision {
        run_typed::<f64>(config, &mut progress)
    } else {
        run_typed::<f32>(config, &mut progress)
    };
    if let Err(e) = &result {
        let summary = Summary {
            status: "incomplete",
            failed_stage: Some(e.stage),
            config_hash: &config.hash(),
            seed: config.seed,
            reference_precision: config.reference_precision,
            dataset_sha256: None,
            epoch0_val_loss: None,
            stage1_epochs: None,
            stage2_epochs: None,
            stage2_in_interval: None,
            test_pf: None,
            wall_estimate_db: None,
        };
        if std::fs::create_dir_all(&config.out_dir).is_ok() {
            if let Ok(json) = serde_json::to_string_pretty(&summary) {
                let _ = std::fs::write(config.summary_path(), json);
            }
        }
    }
    result
}

fn run_typed<T: Scalar>(
    config: &ExperimentConfig,
    progress: &mut impl FnMut(&str),
) -> Result<ExperimentArtifacts, ExperimentError> {
    config.validate().map_err(at("config"))?;
    let config_hash = config.hash();

    progress("generating dataset");
    let (bundle, dataset_paths, dataset_sha256) =
        generate_datasets(config).map_err(at("dataset"))?;

    let detect_config = config.detect_config();
    let model: DetectNet<T> =
        build(&detect_config, config.seed).map_err(|e| at("train")(e.into()))?;
    progress(&format!(
        "training detector ({} parameters)",
        model.param_count()
    ));
    let policy = config.stop_policy();
    let train_cfg = detect_config.train_config(config.seed);

    let epoch_log_path = config.epoch_log_path();
    let mut log = std::io::BufWriter::new(
        std::fs::File::create(&epoch_log_path).map_err(|e| at("train")(e.into()))?,
    );
    let mut log_line = |stage: u32, m: &EpochMetrics| {
        let mut value = serde_json::to_value(m).expect("metrics serialize");
        value["stage"] = stage.into();
        writeln!(log, "{value}").expect("epoch log write");
    };

    let epoch0 = model
        .epoch_metrics(&bundle.val, 0)
        .map_err(|e| at("train")(e.into()))?;
    log_line(0, &epoch0);
    progress(&format!("epoch 0: val_loss {:.4}", epoch0.val_loss));

    let stage1 = train_stage1(
        &model.chain,
        model.params.clone(),
        &train_cfg,
        &bundle.train,
        &bundle.val,
        &policy,
        |m| {
            log_line(1, m);
            progress(&format!(
                "stage1 epoch {}: val_loss {:.4}, pf {:.4}",
                m.epoch, m.val_loss, m.pf
            ));
        },
    )
    .map_err(|e| at("train")(e.into()))?;

    let stage2 = train_stage2(
        &model.chain,
        Snapshot {
            params: stage1.best.params.clone(),
            metrics: stage1.best.metrics.clone(),
        },
        &train_cfg,
        &bundle.train,
        &bundle.val,
        &policy,
        stage1.epochs_run,
        |m| {
            log_line(2, m);
            progress(&format!(
                "stage2 epoch {}: pf {:.4}",
                m.epoch, m.pf
            ));
        },
    )
    .map_err(|e| at("train")(e.into()))?;
    drop(log);

    let trained = DetectNet {
        config: detect_config.clone(),
        chain: model.chain.clone(),
        params: stage2.chosen.params.clone(),
        seed: config.seed,
    };
    let checkpoint_path = config.checkpoint_path();
    save_detectnet(
        &checkpoint_path,
        &trained,
        stage1.epochs_run + stage2.epochs_run,
        &stage2.chosen.metrics,
        &config_hash,
    )
    .map_err(at("train"))?;

    progress("evaluating on the test split");
    let curve = trained
        .dl_curve(&bundle.test)
        .map_err(|e| at("eval")(e.into()))?;
    let curve_path = config.curve_path("dl_curve");
    write_csv(
        &curve_path,
        &[&curve],
        &[
            ("config_hash".into(), config_hash.clone()),
            ("seed".into(), config.seed.to_string()),
        ],
    )
    .map_err(at("eval"))?;
    let wall_estimate_db = estimate_snr_wall(&curve, config.pd_target);

    let summary = Summary {
        status: "complete",
        failed_stage: None,
        config_hash: &config_hash,
        seed: config.seed,
        reference_precision: config.reference_precision,
        dataset_sha256: Some(&dataset_sha256),
        epoch0_val_loss: Some(epoch0.val_loss),
        stage1_epochs: Some(stage1.epochs_run),
        stage2_epochs: Some(stage2.epochs_run),
        stage2_in_interval: Some(stage2.in_interval),
        test_pf: Some(curve.pf),
        wall_estimate_db,
    };
    std::fs::write(
        config.summary_path(),
        serde_json::to_string_pretty(&summary).map_err(|e| at("eval")(e.into()))?,
    )
    .map_err(|e| at("eval")(e.into()))?;

    Ok(ExperimentArtifacts {
        config_hash,
        dataset_paths,
        dataset_sha256,
        checkpoint_path,
        curve_path,
        epoch_log_path,
        summary_path: config.summary_path(),
        epoch0_val_loss: epoch0.val_loss,
        stage1_epochs: stage1.epochs_run,
        stage2_epochs: stage2.epochs_run,
        stage2_in_interval: stage2.in_interval,
        final_metrics: stage2.chosen.metrics,
        curve,
        wall_estimate_db,
    })
}

/// Energy-detector baseline on the same test physics: the pre-normalization
/// frames are regenerated from the dataset spec and thresholded with the
/// exact CFAR threshold at the true noise variance (M infinite).
pub fn ed_baseline_curve(config: &ExperimentConfig) -> Result<DetectionCurve, HarnessError> {
    config.validate()?;
    let spec = config.dataset_spec();
    let threshold = cfar_threshold(config.ed_pf_target, spec.sample_length)?;
    let mut n_neg = 0usize;
    let mut false_alarms = 0usize;
    let mut buckets: std::collections::BTreeMap<i32, (usize, usize)> = Default::default();
    for i in 0..spec.counts.2 {
        let parts = synth_frame_parts(&spec, Split::Test, i)?;
        let stat = energy_statistic(&parts.received, parts.noise_sigma2)?;
        let says_h1 = stat > threshold;
        match parts.label {
            Hypothesis::H0 => {
                n_neg += 1;
                if says_h1 {
                    false_alarms += 1;
                }
            }
            Hypothesis::H1 => {
                let e = buckets.entry(parts.snr_db.round() as i32).or_insert((0, 0));
                e.0 += 1;
                if says_h1 {
                    e.1 += 1;
                }
            }
        }
    }
    Ok(DetectionCurve {
        detector_id: format!("ed_n{}", spec.sample_length),
        pf: false_alarms as f64 / n_neg.max(1) as f64,
        n_neg,
        points: buckets
            .iter()
            .map(|(&snr, &(n_pos, hit))| crate::detectnet::CurvePoint {
                snr_db: snr as f64,
                pd: hit as f64 / n_pos as f64,
                n_pos,
            })
            .collect(),
    })
}

/// Persist a detector with its configuration embedded in the manifest.
pub fn save_detectnet<T: Scalar>(
    path: &Path,
    model: &DetectNet<T>,
    epoch: u32,
    metrics: &EpochMetrics,
    config_hash: &str,
) -> Result<(), HarnessError> {
    save_checkpoint(
        path,
        &model.chain,
        &model.params,
        model.seed,
        epoch,
        serde_json::json!({
            "detectnet_config": model.config,
            "epoch_metrics": metrics,
        }),
        Some(config_hash.to_string()),
    )?;
    Ok(())
}

pub fn load_detectnet<T: Scalar>(path: &Path) -> Result<DetectNet<T>, HarnessError> {
    let (manifest, params) = load_checkpoint::<T>(path)?;
    let config: DetectNetConfig =
        serde_json::from_value(manifest.metrics["detectnet_config"].clone())?;
    let chain = manifest.chain()?;
    Ok(DetectNet {
        config,
        chain,
        params,
        seed: manifest.seed,
    })
}

/// Persist a fusion model with its configuration embedded in the manifest.
pub fn save_scn<T: Scalar>(
    path: &Path,
    scn: &Scn<T>,
    epoch: u32,
    metrics: &EpochMetrics,
    config_hash: &str,
) -> Result<(), HarnessError> {
    save_checkpoint(
        path,
        &scn.chain,
        &scn.params,
        scn.seed,
        epoch,
        serde_json::json!({
            "scn_config": scn.config,
            "epoch_metrics": metrics,
        }),
        Some(config_hash.to_string()),
    )?;
    Ok(())
}

pub fn load_scn<T: Scalar>(path: &Path) -> Result<Scn<T>, HarnessError> {
    let (manifest, params) = load_checkpoint::<T>(path)?;
    let config: ScnConfig = serde_json::from_value(manifest.metrics["scn_config"].clone())?;
    let chain = manifest.chain()?;
    Ok(Scn {
        config,
        chain,
        params,
        seed: manifest.seed,
    })
}
