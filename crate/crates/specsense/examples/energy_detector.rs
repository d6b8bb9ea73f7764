//! Energy-detector walkthrough: exact CFAR threshold calibration against
//! Monte-Carlo noise, then detection with an estimated noise variance at
//! the analytic wall operating point.
//!
//! ```bash
//! cargo run --release -p specsense --example energy_detector
//! ```

use specsense::endet::{
    cfar_threshold, ed_detect, energy_statistic, estimate_noise, gaussian_threshold, snr_wall,
    NoiseModel, SampleBudget, WallQuery,
};
use specsense::rng::RngStream;
use specsense::sigmod::{cscg_frame, Hypothesis};

fn main() {
    let n = 128;
    let sigma2 = 0.5;

    println!("exact CFAR calibration at N = {n}:");
    let trials = 50_000u64;
    for pf in [0.01, 0.05, 0.10] {
        let lambda = cfar_threshold(pf, n).unwrap();
        let root = RngStream::new(7);
        let mut false_alarms = 0u64;
        for t in 0..trials {
            let mut stream = root.substream(t);
            let frame = cscg_frame(n, sigma2, &mut stream);
            if energy_statistic(&frame, sigma2).unwrap() > lambda {
                false_alarms += 1;
            }
        }
        println!(
            "  target pf {pf:.2} -> threshold {lambda:.4}, empirical pf {:.4}",
            false_alarms as f64 / trials as f64
        );
    }

    // Noise uncertainty: estimate sigma^2 from M noise-only samples per
    // trial and detect a Gaussian signal surrogate at the wall SNR.
    let m = 128;
    let budget = SampleBudget::Finite(m);
    let query = WallQuery {
        pf_target: 0.10,
        pd_target: 0.90,
        n_samples: n,
        m_samples: budget,
    };
    let wall_db = snr_wall(&query).unwrap().db().unwrap();
    println!("\nSNR-wall for (pf 10%, pd 90%, N {n}, M {m}): {wall_db:.2} dB");

    let gamma = 10f64.powf(wall_db / 10.0);
    let lambda = gaussian_threshold(0.10, n, budget).unwrap();
    let root = RngStream::new(11);
    let mut detections = 0u64;
    for t in 0..trials {
        let stream = root.substream(t);
        let received = cscg_frame(n, sigma2 * (1.0 + gamma), &mut stream.substream(0));
        let noise_only = cscg_frame(m, sigma2, &mut stream.substream(1));
        let sigma2_hat = estimate_noise(&noise_only, m).unwrap();
        let noise = NoiseModel::estimated(sigma2, m, sigma2_hat);
        if ed_detect(&received, &noise, lambda).unwrap() == Hypothesis::H1 {
            detections += 1;
        }
    }
    println!(
        "detecting at the wall with per-trial noise estimates: pd = {:.4} (target 0.90)",
        detections as f64 / trials as f64
    );
}
