//! Command-line interface. All subcommands read the same flat key-value
//! config file; `--seed`, `--out`, and `--reference-precision` override it.
//! Exit codes: 0 success, 2 validation error, 3 runtime failure.

use crate::coopfuse::{
    coop_curve, scn_build_train, synth_coop_dataset, write_coop_dataset, CoopHeader, FusionRule,
    ScnConfig,
};
use crate::detectnet::DetectionCurve;
use crate::endet::{snr_wall, SampleBudget, SnrWall, WallQuery};
use crate::harness::{
    ed_baseline_curve, estimate_snr_wall, format_wall_table, generate_datasets, load_detectnet,
    load_scn, read_csv, run_experiment, save_scn, wall_report, write_csv, ExperimentConfig,
    ExperimentError, HarnessError, WallEntry,
};
use crate::sigmod::read_dataset;
use crate::tensornet::Scalar;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "specsense",
    version,
    about = "Spectrum sensing toolkit: datasets, detectors, and SNR-wall reports"
)]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key-value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run numeric paths in 64-bit reference precision.
    #[arg(long, global = true)]
    reference_precision: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset operations.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Train a detector or the fusion network.
    Train {
        #[command(subcommand)]
        command: TrainCommand,
    },
    /// Evaluate the trained detector checkpoint on the test split.
    Eval,
    /// Energy-detector baseline curve at an exact CFAR threshold.
    EdBaseline,
    /// SNR-wall table: analytic energy-detector wall vs measured curves.
    WallReport {
        /// Report rows as N:PF (fractional) or N:PF:CURVE.CSV, repeatable.
        #[arg(long = "entry", required = true)]
        entries: Vec<String>,
        /// Detection-rate target.
        #[arg(long, default_value_t = 0.9)]
        pd_target: f64,
    },
    /// Cooperative detection.
    Coop {
        #[command(subcommand)]
        command: CoopCommand,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Generate the train/val/test splits and write SPSD files.
    Gen,
}

#[derive(Subcommand)]
enum TrainCommand {
    /// Two-stage training of the CLDNN detector (generates the dataset,
    /// trains, checkpoints, and evaluates the test split).
    Detectnet,
    /// Train the soft-combination fusion network on cooperative examples
    /// produced by the trained detector checkpoint.
    Scn,
}

#[derive(Subcommand)]
enum CoopCommand {
    /// Evaluate every fusion rule on the cooperative test split.
    Eval,
}

/// Parse argv, run, and map errors to exit codes.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Harness(HarnessError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Experiment(e) if e.stage == "config" => 2,
            _ => 3,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(msg) => CliError::Validation(msg),
            other => CliError::Harness(other),
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &global.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            HarnessError::Io(io) => {
                CliError::Validation(format!("cannot read config {}: {io}", path.display()))
            }
            other => other.into(),
        })?,
        None => match global.seed {
            Some(seed) => ExperimentConfig::with_seed(seed),
            None => {
                return Err(CliError::Validation(
                    "a seed is mandatory: pass --seed or a --config file with one".into(),
                ))
            }
        },
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(out) = &global.out {
        config.out_dir = out.clone();
    }
    if global.reference_precision {
        config.reference_precision = true;
    }
    config.validate().map_err(CliError::from)?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Dataset {
            command: DatasetCommand::Gen,
        } => {
            let config = load_config(&cli.global)?;
            let (bundle, paths, digests) = generate_datasets(&config)?;
            println!("config hash: {}", config.hash());
            for (path, digest) in paths.iter().zip(&digests) {
                println!("{}  sha256={digest}", path.display());
            }
            println!(
                "frames: {} train / {} val / {} test",
                bundle.train.len(),
                bundle.val.len(),
                bundle.test.len()
            );
            Ok(())
        }
        Command::Train {
            command: TrainCommand::Detectnet,
        } => {
            let config = load_config(&cli.global)?;
            let artifacts = run_experiment(&config, |msg| eprintln!("[train] {msg}"))?;
            println!("checkpoint: {}", artifacts.checkpoint_path.display());
            println!("epoch log:  {}", artifacts.epoch_log_path.display());
            println!("curve:      {}", artifacts.curve_path.display());
            println!(
                "stage1 epochs: {}, stage2 epochs: {}, pf in interval: {}",
                artifacts.stage1_epochs, artifacts.stage2_epochs, artifacts.stage2_in_interval
            );
            println!("test pf: {:.4}", artifacts.curve.pf);
            match artifacts.wall_estimate_db {
                Some(db) => println!("estimated wall: {db:.2} dB"),
                None => println!("estimated wall: not reached on this grid"),
            }
            Ok(())
        }
        Command::Eval => {
            let config = load_config(&cli.global)?;
            if config.reference_precision {
                eval_checkpoint::<f64>(&config)
            } else {
                eval_checkpoint::<f32>(&config)
            }
        }
        Command::EdBaseline => {
            let config = load_config(&cli.global)?;
            let curve = ed_baseline_curve(&config)?;
            std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::Harness(e.into()))?;
            let path = config.curve_path("ed_curve");
            write_csv(
                &path,
                &[&curve],
                &[
                    ("config_hash".into(), config.hash()),
                    ("seed".into(), config.seed.to_string()),
                ],
            )?;
            println!("curve: {}", path.display());
            println!("pf target {:.4}, empirical pf {:.4}", config.ed_pf_target, curve.pf);
            let analytic = snr_wall(&WallQuery {
                pf_target: config.ed_pf_target,
                pd_target: config.pd_target,
                n_samples: config.sample_length,
                m_samples: SampleBudget::Infinite,
            })
            .map_err(|e| CliError::Harness(e.into()))?;
            if let SnrWall::Db(db) = analytic {
                println!("analytic wall (M = inf): {db:.2} dB");
            }
            if let Some(db) = estimate_snr_wall(&curve, config.pd_target) {
                println!("empirical wall: {db:.2} dB");
            }
            Ok(())
        }
        Command::WallReport { entries, pd_target } => {
            let parsed = entries
                .iter()
                .map(|raw| parse_wall_entry(raw))
                .collect::<Result<Vec<_>, _>>()?;
            let curves: Vec<Option<Vec<DetectionCurve>>> = parsed
                .iter()
                .map(|(_, _, path)| {
                    path.as_ref()
                        .map(|p| read_csv(p).map_err(CliError::from))
                        .transpose()
                })
                .collect::<Result<_, _>>()?;
            let wall_entries: Vec<WallEntry> = parsed
                .iter()
                .zip(&curves)
                .map(|((n, pf, _), curve)| WallEntry {
                    sample_length: *n,
                    pf_observed: *pf,
                    curve: curve.as_ref().and_then(|c| c.first()),
                })
                .collect();
            let rows = wall_report(&wall_entries, pd_target)?;
            print!("{}", format_wall_table(&rows));
            Ok(())
        }
        Command::Coop {
            command: CoopCommand::Eval,
        } => {
            let config = load_config(&cli.global)?;
            if config.reference_precision {
                coop_eval::<f64>(&config)
            } else {
                coop_eval::<f32>(&config)
            }
        }
        Command::Train {
            command: TrainCommand::Scn,
        } => {
            let config = load_config(&cli.global)?;
            if config.reference_precision {
                train_scn::<f64>(&config)
            } else {
                train_scn::<f32>(&config)
            }
        }
    }
}

fn require_file(path: &std::path::Path, hint: &str) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "{} not found; run `{hint}` first",
            path.display()
        )));
    }
    Ok(())
}

fn eval_checkpoint<T: Scalar>(config: &ExperimentConfig) -> Result<(), CliError> {
    let ckpt = config.checkpoint_path();
    require_file(&ckpt, "specsense train detectnet")?;
    let model = load_detectnet::<T>(&ckpt)?;
    let test_path = config.dataset_path("test");
    if !test_path.exists() {
        eprintln!("[eval] test split missing, regenerating");
        generate_datasets(config)?;
    }
    let (_, frames) = read_dataset(&test_path).map_err(|e| CliError::Harness(e.into()))?;
    let curve = model
        .dl_curve(&frames)
        .map_err(|e| CliError::Harness(e.into()))?;
    let path = config.curve_path("dl_curve");
    write_csv(
        &path,
        &[&curve],
        &[
            ("config_hash".into(), config.hash()),
            ("seed".into(), config.seed.to_string()),
        ],
    )?;
    println!("curve: {}", path.display());
    println!("pf: {:.4}", curve.pf);
    match estimate_snr_wall(&curve, config.pd_target) {
        Some(db) => println!("estimated wall: {db:.2} dB"),
        None => println!("estimated wall: not reached on this grid"),
    }
    Ok(())
}

fn train_scn<T: Scalar>(config: &ExperimentConfig) -> Result<(), CliError> {
    let ckpt = config.checkpoint_path();
    require_file(&ckpt, "specsense train detectnet")?;
    let node = load_detectnet::<T>(&ckpt)?;
    let k = config.coop_nodes;
    let nodes: Vec<&_> = std::iter::repeat_n(&node, k).collect();
    let base = config.dataset_spec();
    eprintln!("[scn] synthesizing cooperative dataset (k = {k})");
    let (train, val, test) =
        synth_coop_dataset(&base, k, &nodes).map_err(|e| CliError::Harness(e.into()))?;

    let hash = config.hash();
    for (split, examples) in [("train", &train), ("val", &val), ("test", &test)] {
        let header = CoopHeader {
            split: split.to_string(),
            records: examples.len() as u64,
            nodes: k as u8,
            seed: config.seed,
            sample_length: config.sample_length,
            scheme_ids: base.schemes.iter().map(|s| s.id()).collect(),
            snr_grid_db: base.snr_grid_db.clone(),
            config_hash: Some(hash.clone()),
        };
        let path = config.out_dir.join(format!("coop_{split}.spce"));
        write_coop_dataset(&path, &header, examples)
            .map_err(|e| CliError::Harness(e.into()))?;
        println!("{}", path.display());
    }

    let scn_config = ScnConfig {
        dropout: config.dropout,
        lr: config.lr,
        batch: config.batch,
        ..ScnConfig::new(k)
    };
    let (scn, report) = scn_build_train::<T>(
        &scn_config,
        &train,
        &val,
        &config.stop_policy(),
        config.seed,
        |m| eprintln!("[scn] epoch {}: val_loss {:.4}, pf {:.4}", m.epoch, m.val_loss, m.pf),
    )
    .map_err(|e| CliError::Harness(e.into()))?;
    let path = config.scn_checkpoint_path();
    save_scn(
        &path,
        &scn,
        report.stage1_epochs + report.stage2_epochs,
        &report.final_metrics,
        &hash,
    )?;
    println!("checkpoint: {}", path.display());
    println!(
        "stage1 epochs: {}, stage2 epochs: {}, pf in interval: {}",
        report.stage1_epochs, report.stage2_epochs, report.pf_in_interval
    );
    Ok(())
}

fn coop_eval<T: Scalar>(config: &ExperimentConfig) -> Result<(), CliError> {
    let detect_path = config.checkpoint_path();
    let scn_path = config.scn_checkpoint_path();
    require_file(&detect_path, "specsense train detectnet")?;
    require_file(&scn_path, "specsense train scn")?;
    let node = load_detectnet::<T>(&detect_path)?;
    let scn = load_scn::<T>(&scn_path)?;
    let k = scn.config.nodes;

    // Prefer the stored test split; regenerate deterministically otherwise.
    let spce_path = config.out_dir.join("coop_test.spce");
    let test = if spce_path.exists() {
        crate::coopfuse::read_coop_dataset(&spce_path)
            .map_err(|e| CliError::Harness(e.into()))?
            .1
    } else {
        let nodes: Vec<&_> = std::iter::repeat_n(&node, k).collect();
        synth_coop_dataset(&config.dataset_spec(), k, &nodes)
            .map_err(|e| CliError::Harness(e.into()))?
            .2
    };

    let mut curves = Vec::new();
    for rule in [
        FusionRule::Scn,
        FusionRule::LogicalOr,
        FusionRule::Majority,
        FusionRule::LogicalAnd,
    ] {
        let scn_ref = (rule == FusionRule::Scn).then_some(&scn);
        curves.push(
            coop_curve(rule, scn_ref, &test).map_err(|e| CliError::Harness(e.into()))?,
        );
    }
    std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::Harness(e.into()))?;
    let path = config.curve_path("coop_curves");
    let refs: Vec<&DetectionCurve> = curves.iter().collect();
    write_csv(
        &path,
        &refs,
        &[
            ("config_hash".into(), config.hash()),
            ("seed".into(), config.seed.to_string()),
        ],
    )?;
    println!("curves: {}", path.display());
    for curve in &curves {
        let wall = estimate_snr_wall(curve, config.pd_target)
            .map_or("-".to_string(), |db| format!("{db:.2} dB"));
        println!(
            "{:<16} pf {:.4}  wall(pd >= {:.0}%) {}",
            curve.detector_id,
            curve.pf,
            config.pd_target * 100.0,
            wall
        );
    }
    Ok(())
}

fn parse_wall_entry(raw: &str) -> Result<(usize, f64, Option<PathBuf>), CliError> {
    let parts: Vec<&str> = raw.splitn(3, ':').collect();
    if parts.len() < 2 {
        return Err(CliError::Validation(format!(
            "bad --entry {raw:?}: expected N:PF or N:PF:CURVE.CSV"
        )));
    }
    let n: usize = parts[0]
        .parse()
        .map_err(|_| CliError::Validation(format!("bad sample length in {raw:?}")))?;
    let pf: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Validation(format!("bad pf in {raw:?}")))?;
    if !(pf > 0.0 && pf < 1.0) {
        return Err(CliError::Validation(format!(
            "pf {pf} outside (0, 1) in {raw:?}"
        )));
    }
    Ok((n, pf, parts.get(2).map(PathBuf::from)))
}
