//! Black-box tests of the `specsense` binary: subcommand wiring, file
//! outputs, and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specsense"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("specsense-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("exp.conf");
    std::fs::write(
        &path,
        format!(
            "# desk smoke configuration\n\
             seed = 11\n\
             out_dir = {}\n\
             sample_length = 64\n\
             train_count = 900\n\
             val_count = 300\n\
             test_count = 300\n\
             snr_min_db = -8\n\
             snr_max_db = 0\n\
             conv_filters = 4\n\
             kernel = 5\n\
             lstm_cells = 8\n\
             fc1_units = 8\n\
             batch = 100\n\
             stage1_patience = 0\n\
             stage1_max_epochs = 1\n\
             stage2_max_epochs = 1\n\
             coop_nodes = 2\n",
            dir.join("out").display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn dataset_gen_is_deterministic_across_invocations() {
    let dir = tmp_dir("dataset");
    let config = write_config(&dir);
    let run = || {
        let output = bin()
            .args(["dataset", "gen", "--config"])
            .arg(&config)
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        String::from_utf8(output.stdout).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    assert!(first.contains("sha256="));
    assert!(dir.join("out/train.spsd").exists());
    assert!(dir.join("out/val.spsd").exists());
    assert!(dir.join("out/test.spsd").exists());
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn missing_seed_is_a_validation_error() {
    let output = bin().args(["dataset", "gen"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("seed"));
}

#[test]
fn bad_config_value_is_a_validation_error() {
    let dir = tmp_dir("badcfg");
    let path = dir.join("bad.conf");
    std::fs::write(&path, "seed = 1\ndropout = 2.0\n").unwrap();
    let output = bin()
        .args(["dataset", "gen", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn eval_without_checkpoint_points_at_training() {
    let dir = tmp_dir("nockpt");
    let config = write_config(&dir);
    let output = bin().args(["eval", "--config"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("train detectnet"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn wall_report_prints_published_energy_detector_walls() {
    let output = bin()
        .args([
            "wall-report",
            "--entry",
            "64:0.0805",
            "--entry",
            "128:0.0734",
            "--entry",
            "256:0.0845",
            "--entry",
            "512:0.0773",
            "--entry",
            "1024:0.0786",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    for expect in ["-3.91", "-5.57", "-7.41", "-8.94", "-10.55"] {
        assert!(stdout.contains(expect), "missing {expect} in:\n{stdout}");
    }
}

#[test]
fn wall_report_rejects_malformed_entries() {
    let output = bin()
        .args(["wall-report", "--entry", "64"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = bin()
        .args(["wall-report", "--entry", "64:1.5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

/// Full chain: train -> eval -> ed-baseline -> train scn -> coop eval, at a
/// smoke scale that finishes in well under a minute.
#[test]
fn full_command_chain_runs() {
    let dir = tmp_dir("chain");
    let config = write_config(&dir);
    let run = |args: &[&str]| {
        let output = bin().args(args).arg("--config").arg(&config).output().unwrap();
        assert!(
            output.status.success(),
            "{args:?} failed:\n{}",
            String::from_utf8_lossy(&output.stderr)
        );
        String::from_utf8(output.stdout).unwrap()
    };

    let train_out = run(&["train", "detectnet"]);
    assert!(train_out.contains("checkpoint:"));
    assert!(dir.join("out/detectnet.ckpt").exists());
    assert!(dir.join("out/epochs.jsonl").exists());

    let eval_out = run(&["eval"]);
    assert!(eval_out.contains("pf:"));
    assert!(dir.join("out/dl_curve.csv").exists());

    let ed_out = run(&["ed-baseline"]);
    assert!(ed_out.contains("empirical pf"));
    assert!(dir.join("out/ed_curve.csv").exists());

    let scn_out = run(&["train", "scn"]);
    assert!(scn_out.contains("checkpoint:"));
    assert!(dir.join("out/scn.ckpt").exists());
    assert!(dir.join("out/coop_train.spce").exists());
    assert!(dir.join("out/coop_test.spce").exists());

    let coop_out = run(&["coop", "eval"]);
    assert!(coop_out.contains("scn_k2"));
    assert!(coop_out.contains("logical_or_k2"));
    assert!(dir.join("out/coop_curves.csv").exists());

    std::fs::remove_dir_all(dir).ok();
}
