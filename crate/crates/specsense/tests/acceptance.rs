//! Acceptance suite. Each test prints one PASS/FAIL line for its
//! criterion; the desk-scale training fixture is shared by the detector
//! quality, stop-policy, and cooperative criteria.

use specsense::coopfuse::{coop_curve, scn_build_train, synth_coop_dataset, FusionRule, ScnConfig};
use specsense::detectnet::{
    build, train_stage1, train_stage2, DetectNet, DetectNetConfig, DetectionCurve, Snapshot,
    StopPolicy, TrainItem,
};
use specsense::endet::{cfar_threshold, energy_statistic, snr_wall, SampleBudget, WallQuery};
use specsense::harness::{run_experiment, ExperimentConfig};
use specsense::rng::RngStream;
use specsense::sigmod::{cscg_frame, synth_dataset, DatasetBundle, DatasetSpec, ModScheme};
use specsense::tensornet::{grad_check, GradCheckConfig};
use std::sync::OnceLock;
use std::time::Instant;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "CRITERION {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Closed-form wall exactness across the published sample lengths
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_wall_values_across_sample_lengths() {
    let started = Instant::now();
    let cases: [(f64, usize, f64); 5] = [
        (0.0805, 64, -3.91),
        (0.0734, 128, -5.57),
        (0.0845, 256, -7.41),
        (0.0773, 512, -8.94),
        (0.0786, 1024, -10.55),
    ];
    let mut worst = 0.0f64;
    for (pf, n, expect) in cases {
        let got = snr_wall(&WallQuery {
            pf_target: pf,
            pd_target: 0.90,
            n_samples: n,
            m_samples: SampleBudget::Infinite,
        })
        .unwrap()
        .db()
        .unwrap();
        worst = worst.max((got - expect).abs());
        assert!(
            (got - expect).abs() <= 0.02,
            "N={n}, pf={pf}: wall {got} vs {expect}"
        );
    }
    let elapsed = started.elapsed();
    report(
        "1 (wall table exactness)",
        elapsed.as_secs_f64() < 1.0,
        &format!(
            "five published (pf, N) walls within ±0.02 dB (worst |err| {worst:.4} dB) in {:.3} s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. The quoted N = 128 operating point
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_operating_point() {
    let started = Instant::now();
    let got = snr_wall(&WallQuery {
        pf_target: 0.0592,
        pd_target: 0.90,
        n_samples: 128,
        m_samples: SampleBudget::Infinite,
    })
    .unwrap()
    .db()
    .unwrap();
    let pass = (got - (-5.35)).abs() <= 0.02 && started.elapsed().as_secs_f64() < 1.0;
    report(
        "2 (operating point)",
        pass,
        &format!("wall(pd 90%, pf 5.92%, N 128) = {got:.4} dB vs -5.35 ± 0.02"),
    );
}

// ---------------------------------------------------------------------------
// 3. CFAR calibration over a (N, pf) grid
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_cfar_calibration() {
    let started = Instant::now();
    let trials = 100_000u64;
    let mut detail = String::new();
    let mut all_pass = true;
    for n in [64usize, 128] {
        // One seeded noise population per sample length, reused across
        // thresholds; each (n, pf) case remains a valid calibration check.
        let root = RngStream::new(0xCFA0 + n as u64);
        let stats: Vec<f64> = (0..trials)
            .map(|t| {
                let mut stream = root.substream(t);
                let frame = cscg_frame(n, 0.5, &mut stream);
                energy_statistic(&frame, 0.5).unwrap()
            })
            .collect();
        for pf in [0.01, 0.05, 0.10] {
            let lambda = cfar_threshold(pf, n).unwrap();
            let hits = stats.iter().filter(|&&s| s > lambda).count();
            let rate = hits as f64 / trials as f64;
            let sigma = (pf * (1.0 - pf) / trials as f64).sqrt();
            let ok = (rate - pf).abs() <= 3.0 * sigma;
            all_pass &= ok;
            detail.push_str(&format!("(N={n}, pf={pf}: {rate:.4}) "));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    all_pass &= elapsed < 60.0;
    report(
        "3 (CFAR calibration)",
        all_pass,
        &format!("{detail}in {elapsed:.1} s (3-sigma binomial bands, 1e5 frames each)"),
    );
}

// ---------------------------------------------------------------------------
// 4. Gradient fidelity on a reduced detector
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_gradient_fidelity() {
    let started = Instant::now();
    let config = DetectNetConfig {
        sample_length: 32,
        conv_filters: 8,
        kernel: 5,
        lstm_cells: 16,
        fc1_units: 16,
        ..DetectNetConfig::full_scale(32)
    };
    let spec = DatasetSpec::new(vec![ModScheme::Qam16], 32, 404)
        .with_counts(24, 8, 8)
        .with_snr_grid(vec![-2.0, 0.0, 2.0]);
    let frames = synth_dataset(&spec).unwrap().train;

    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let model = build::<f64>(&config, 1000 + seed).unwrap();
        let frame = &frames[seed as usize % frames.len()];
        let input = frame.input_tensor::<f64>();
        let rep = grad_check(
            &model.chain,
            &model.params,
            &input,
            frame.label as usize,
            &GradCheckConfig {
                samples: 200,
                step: 1e-5,
                seed,
            },
        )
        .unwrap();
        assert!(rep.checked >= 200);
        worst = worst.max(rep.max_rel_error);
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = worst < 1e-4 && elapsed < 300.0;
    report(
        "4 (gradient fidelity)",
        pass,
        &format!(
            "max relative error {worst:.3e} over 10 seeds x 200 coordinates in {elapsed:.1} s"
        ),
    );
}

// ---------------------------------------------------------------------------
// Shared desk-scale fixture for criteria 5-8
// ---------------------------------------------------------------------------

const DESK_SEEDS: [u64; 3] = [1, 2, 3];
const DESK_SNR_LO: i32 = -16;
const DESK_SNR_HI: i32 = -4;

struct DeskRun {
    seed: u64,
    curve: DetectionCurve,
    stage2_in_interval: bool,
    scn_curve: DetectionCurve,
    or_curve: DetectionCurve,
    majority_curve: DetectionCurve,
    and_curve: DetectionCurve,
    minutes: f64,
}

fn desk_spec(seed: u64) -> DatasetSpec {
    DatasetSpec::new(vec![ModScheme::Gfsk], 64, seed)
        .with_counts(8000, 2666, 2666)
        .with_snr_grid((DESK_SNR_LO..=DESK_SNR_HI).map(f64::from).collect())
}

fn desk_policy() -> StopPolicy {
    StopPolicy {
        stage1_patience: 6,
        stage1_max_epochs: 20,
        pf_low: 0.07,
        pf_high: 0.09,
        stage2_max_epochs: 10,
    }
}

fn run_desk(seed: u64) -> DeskRun {
    let started = Instant::now();
    let bundle: DatasetBundle = synth_dataset(&desk_spec(seed)).unwrap();
    let config = DetectNetConfig::reduced(64);
    let policy = desk_policy();
    let model = build::<f32>(&config, seed).unwrap();
    let train_cfg = config.train_config(seed);

    let stage1 = train_stage1(
        &model.chain,
        model.params.clone(),
        &train_cfg,
        &bundle.train,
        &bundle.val,
        &policy,
        |m| eprintln!("[desk {seed}] s1 e{}: loss {:.4} pf {:.3}", m.epoch, m.val_loss, m.pf),
    )
    .unwrap();
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
        |m| eprintln!("[desk {seed}] s2 e{}: pf {:.3}", m.epoch, m.pf),
    )
    .unwrap();
    assert!(
        stage1.epochs_run + stage2.epochs_run <= 30,
        "epoch budget exceeded"
    );

    let node = DetectNet {
        config: config.clone(),
        chain: model.chain.clone(),
        params: stage2.chosen.params.clone(),
        seed,
    };
    let curve = node.dl_curve(&bundle.test).unwrap();

    // Cooperative stage: two homogeneous nodes over Rayleigh fading.
    let coop_base = desk_spec(seed).with_counts(6000, 2000, 2000);
    let (coop_train, coop_val, coop_test) =
        synth_coop_dataset(&coop_base, 2, &[&node, &node]).unwrap();
    let scn_config = ScnConfig::new(2);
    let scn_policy = StopPolicy {
        stage1_patience: 4,
        stage1_max_epochs: 15,
        pf_low: 0.07,
        pf_high: 0.09,
        stage2_max_epochs: 10,
    };
    let (scn, _report) = scn_build_train::<f32>(
        &scn_config,
        &coop_train,
        &coop_val,
        &scn_policy,
        seed,
        |_| {},
    )
    .unwrap();

    let scn_curve = coop_curve(FusionRule::Scn, Some(&scn), &coop_test).unwrap();
    let or_curve = coop_curve::<f32>(FusionRule::LogicalOr, None, &coop_test).unwrap();
    let majority_curve = coop_curve::<f32>(FusionRule::Majority, None, &coop_test).unwrap();
    let and_curve = coop_curve::<f32>(FusionRule::LogicalAnd, None, &coop_test).unwrap();

    DeskRun {
        seed,
        curve,
        stage2_in_interval: stage2.in_interval,
        scn_curve,
        or_curve,
        majority_curve,
        and_curve,
        minutes: started.elapsed().as_secs_f64() / 60.0,
    }
}

fn desk_runs() -> &'static [DeskRun] {
    static RUNS: OnceLock<Vec<DeskRun>> = OnceLock::new();
    RUNS.get_or_init(|| DESK_SEEDS.iter().map(|&seed| run_desk(seed)).collect())
}

// ---------------------------------------------------------------------------
// 5. Desk-scale detector quality
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_desk_scale_detector_quality() {
    let runs = desk_runs();
    let mut passes = 0;
    let mut detail = String::new();
    for run in runs {
        let pd_at_minus4 = run.curve.pd_at(-4.0).unwrap_or(0.0);
        let ok = run.curve.pf <= 0.10 && pd_at_minus4 >= 0.90;
        passes += ok as usize;
        detail.push_str(&format!(
            "(seed {}: pf {:.3}, pd@-4dB {:.3}, {:.1} min) ",
            run.seed, run.curve.pf, pd_at_minus4, run.minutes
        ));
    }
    // Each passing run beats the analytic wall: pd >= 90% at -4 dB with
    // pf <= 10% places the learned wall below the -3.91 dB energy-detector
    // wall at comparable pf.
    let edw = snr_wall(&WallQuery {
        pf_target: 0.0805,
        pd_target: 0.90,
        n_samples: 64,
        m_samples: SampleBudget::Infinite,
    })
    .unwrap()
    .db()
    .unwrap();
    detail.push_str(&format!("energy-detector wall {edw:.2} dB"));
    report(
        "5 (desk-scale detector quality)",
        passes >= 2,
        &format!("{passes}/3 seeds at pf <= 10% and pd(-4 dB) >= 90%; {detail}"),
    );
}

// ---------------------------------------------------------------------------
// 6. Two-stage stop policy lands in the pf interval
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_two_stage_policy() {
    let runs = desk_runs();
    let flagged: Vec<u64> = runs
        .iter()
        .filter(|r| !r.stage2_in_interval)
        .map(|r| r.seed)
        .collect();
    report(
        "6 (two-stage policy)",
        flagged.len() <= 1,
        &format!(
            "{} of 3 runs flagged out-of-interval (flagged seeds: {flagged:?}, interval [7%, 9%])",
            flagged.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Cooperative gain: learned fusion cuts pf at matched detection
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_cooperative_gain() {
    let runs = desk_runs();
    let mut scn_pfs = Vec::new();
    let mut or_pfs = Vec::new();
    let mut detail = String::new();
    for run in runs {
        // Lowest grid SNR where both rules reach pd >= 90%.
        let qualifying = run
            .scn_curve
            .points
            .iter()
            .zip(&run.or_curve.points)
            .find(|(s, o)| s.pd >= 0.90 && o.pd >= 0.90);
        let snr = qualifying.map(|(s, _)| s.snr_db);
        assert!(
            snr.is_some(),
            "seed {}: no common SNR reaches pd 90%",
            run.seed
        );
        scn_pfs.push(run.scn_curve.pf);
        or_pfs.push(run.or_curve.pf);
        detail.push_str(&format!(
            "(seed {}: common pd>=90% from {} dB, scn pf {:.3} vs OR pf {:.3}) ",
            run.seed,
            snr.unwrap(),
            run.scn_curve.pf,
            run.or_curve.pf
        ));
    }
    let scn_mean = scn_pfs.iter().sum::<f64>() / scn_pfs.len() as f64;
    let or_mean = or_pfs.iter().sum::<f64>() / or_pfs.len() as f64;
    report(
        "7 (cooperative gain)",
        scn_mean <= or_mean,
        &format!("{detail}mean scn pf {scn_mean:.4} <= mean OR pf {or_mean:.4}"),
    );
}

// ---------------------------------------------------------------------------
// 8. Fusion algebra: OR >= MAJORITY >= AND, exactly
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_fusion_algebra() {
    let runs = desk_runs();
    let mut pass = true;
    for run in runs {
        pass &= run.or_curve.pf >= run.majority_curve.pf
            && run.majority_curve.pf >= run.and_curve.pf;
        for ((o, m), a) in run
            .or_curve
            .points
            .iter()
            .zip(&run.majority_curve.points)
            .zip(&run.and_curve.points)
        {
            pass &= o.pd >= m.pd && m.pd >= a.pd;
        }
    }
    report(
        "8 (fusion algebra)",
        pass,
        "pd and pf ordering OR >= MAJORITY >= AND exact on every evaluated cooperative dataset",
    );
}

// ---------------------------------------------------------------------------
// 9. Determinism of the full experiment pipeline
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_determinism() {
    let out = std::env::temp_dir().join(format!("specsense-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&out).unwrap();
    let mut config = ExperimentConfig::with_seed(777);
    config.out_dir = out.clone();
    config.sample_length = 64;
    config.train_count = 1200;
    config.val_count = 400;
    config.test_count = 400;
    config.snr_min_db = -8.0;
    config.snr_max_db = 0.0;
    config.conv_filters = 4;
    config.kernel = 5;
    config.lstm_cells = 8;
    config.fc1_units = 8;
    config.batch = 100;
    config.stage1_patience = 0;
    config.stage1_max_epochs = 1;
    config.stage2_max_epochs = 1;
    config.reference_precision = true;

    let a = run_experiment(&config, |_| {}).unwrap();
    let b = run_experiment(&config, |_| {}).unwrap();
    let same_sha = a.dataset_sha256 == b.dataset_sha256;
    let same_loss = a.epoch0_val_loss.to_bits() == b.epoch0_val_loss.to_bits();
    std::fs::remove_dir_all(out).ok();
    report(
        "9 (determinism)",
        same_sha && same_loss,
        &format!(
            "dataset sha256 equal: {same_sha}; epoch-0 val loss bit-identical: {same_loss} \
             ({:.17} reference mode)",
            a.epoch0_val_loss
        ),
    );
}
