//! Two-node cooperative sensing: train a local detector, synthesize
//! cooperative examples over independent Rayleigh channels, train the
//! soft-combination fusion network, and compare it with the hard rules.
//!
//! ```bash
//! cargo run --release -p specsense --example cooperative_fusion
//! ```

use specsense::coopfuse::{
    coop_curve, scn_build_train, synth_coop_dataset, FusionRule, ScnConfig,
};
use specsense::detectnet::{build, train_stage1, DetectNet, DetectNetConfig, StopPolicy};
use specsense::sigmod::{synth_dataset, DatasetSpec, ModScheme};

fn main() {
    let seed = 3;
    let base = DatasetSpec::new(vec![ModScheme::Gfsk], 64, seed)
        .with_counts(4000, 1300, 2000)
        .with_snr_grid((-14..=-2).map(f64::from).collect());

    // A quick local detector shared by both nodes.
    println!("training the local detector...");
    let bundle = synth_dataset(&base).unwrap();
    let config = DetectNetConfig::reduced(64);
    let fresh = build::<f32>(&config, seed).unwrap();
    let policy = StopPolicy {
        stage1_patience: 3,
        stage1_max_epochs: 8,
        ..StopPolicy::default()
    };
    let stage1 = train_stage1(
        &fresh.chain,
        fresh.params.clone(),
        &config.train_config(seed),
        &bundle.train,
        &bundle.val,
        &policy,
        |m| println!("  epoch {}: val_loss {:.4}, pf {:.3}", m.epoch, m.val_loss, m.pf),
    )
    .unwrap();
    let node = DetectNet {
        config: config.clone(),
        chain: fresh.chain.clone(),
        params: stage1.best.params,
        seed,
    };

    println!("\nsynthesizing k = 2 cooperative examples (shared signal, independent Rayleigh fading)...");
    let (train, val, test) = synth_coop_dataset(&base, 2, &[&node, &node]).unwrap();

    println!("training the fusion network on node probability pairs...");
    let scn_config = ScnConfig { lr: 1e-3, ..ScnConfig::new(2) };
    let scn_policy = StopPolicy {
        stage1_patience: 4,
        stage1_max_epochs: 15,
        pf_low: 0.07,
        pf_high: 0.09,
        stage2_max_epochs: 8,
    };
    let (scn, report) =
        scn_build_train::<f32>(&scn_config, &train, &val, &scn_policy, seed, |_| {}).unwrap();
    println!(
        "fusion training: stage1 {} epochs, stage2 {} epochs, pf in interval: {}",
        report.stage1_epochs, report.stage2_epochs, report.pf_in_interval
    );

    println!("\nfusion rules on the cooperative test split:");
    println!("{:<16} {:>8}  pd per SNR (dB)", "rule", "pf");
    for rule in [
        FusionRule::Scn,
        FusionRule::LogicalOr,
        FusionRule::Majority,
        FusionRule::LogicalAnd,
    ] {
        let scn_ref = (rule == FusionRule::Scn).then_some(&scn);
        let curve = coop_curve(rule, scn_ref, &test).unwrap();
        let pds: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{}:{:.2}", p.snr_db, p.pd))
            .collect();
        println!("{:<16} {:>8.4}  {}", curve.detector_id, curve.pf, pds.join(" "));
    }
    println!(
        "\nthe learned rule holds detection close to logical-OR while cutting \
         its false-alarm rate; AND and majority trade detections away instead"
    );
}
