//! Closed-form SNR-wall table across sample lengths, plus the single
//! operating point quoted for the N = 128 comparison.
//!
//! ```bash
//! cargo run --release -p specsense --example snr_wall_table
//! ```

use specsense::endet::{snr_wall, SampleBudget, WallQuery};
use specsense::harness::{format_wall_table, wall_report, WallEntry};

fn main() {
    // Observed false-alarm rates per sample length (pd target 90%).
    let rows = [
        (64usize, 0.0805),
        (128, 0.0734),
        (256, 0.0845),
        (512, 0.0773),
        (1024, 0.0786),
    ];
    let entries: Vec<WallEntry> = rows
        .iter()
        .map(|&(sample_length, pf_observed)| WallEntry {
            sample_length,
            pf_observed,
            curve: None,
        })
        .collect();
    let report = wall_report(&entries, 0.9).unwrap();
    println!("energy-detector walls, M -> infinity, pd target 90%:\n");
    print!("{}", format_wall_table(&report));

    let op = WallQuery {
        pf_target: 0.0592,
        pd_target: 0.90,
        n_samples: 128,
        m_samples: SampleBudget::Infinite,
    };
    println!(
        "\noperating point (pf 5.92%, pd 90%, N 128): {:.2} dB",
        snr_wall(&op).unwrap().db().unwrap()
    );

    // Finite noise-estimation budgets push the wall up.
    println!("\nwall vs noise-estimation budget at N = 128, pf 10%, pd 90%:");
    for m in [64usize, 128, 512, 4096] {
        let q = WallQuery {
            pf_target: 0.10,
            pd_target: 0.90,
            n_samples: 128,
            m_samples: SampleBudget::Finite(m),
        };
        println!("  M = {m:<5} -> {:.2} dB", snr_wall(&q).unwrap().db().unwrap());
    }
    let q = WallQuery {
        pf_target: 0.10,
        pd_target: 0.90,
        n_samples: 128,
        m_samples: SampleBudget::Infinite,
    };
    println!("  M = inf   -> {:.2} dB", snr_wall(&q).unwrap().db().unwrap());
}
