//! Synthesize a small labeled dataset, write it as SPSD files, and print
//! per-class and per-SNR statistics.
//!
//! ```bash
//! cargo run --release -p specsense --example generate_dataset
//! ```

use specsense::sigmod::{
    read_dataset, synth_dataset, write_dataset, DatasetHeader, DatasetSpec, Hypothesis, ModScheme,
    Split,
};
use std::collections::BTreeMap;

fn main() {
    let spec = DatasetSpec::new(vec![ModScheme::Qpsk, ModScheme::Gfsk], 128, 2024)
        .with_counts(1800, 600, 600)
        .with_snr_grid((-10..=10).step_by(2).map(f64::from).collect());

    println!("generating {:?}", spec.counts);
    let bundle = synth_dataset(&spec).unwrap();

    let out = std::env::temp_dir().join("specsense-example-dataset");
    std::fs::create_dir_all(&out).unwrap();
    for split in Split::ALL {
        let frames = bundle.split(split);
        let header = DatasetHeader::for_split(&spec, split.name(), frames.len());
        let path = out.join(format!("{}.spsd", split.name()));
        write_dataset(&path, &header, frames).unwrap();
        println!("wrote {} ({} frames)", path.display(), frames.len());
    }

    // Read one split back and summarize it.
    let (header, frames) = read_dataset(&out.join("train.spsd")).unwrap();
    println!("\ntrain split (seed {}):", header.seed);
    let positives = frames.iter().filter(|f| f.label == Hypothesis::H1).count();
    println!("  {} H1 / {} H0", positives, frames.len() - positives);

    let mut by_scheme: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_snr: BTreeMap<i32, usize> = BTreeMap::new();
    for frame in &frames {
        if let Some(scheme) = frame.scheme {
            *by_scheme.entry(scheme.name()).or_default() += 1;
            *by_snr.entry(frame.snr_key()).or_default() += 1;
        }
    }
    println!("  positives by scheme: {by_scheme:?}");
    println!("  positives by SNR:    {by_snr:?}");

    let mean_power: f64 =
        frames.iter().map(|f| f.frame().power()).sum::<f64>() / frames.len() as f64;
    println!("  mean frame power after normalization: {mean_power:.6}");
}
