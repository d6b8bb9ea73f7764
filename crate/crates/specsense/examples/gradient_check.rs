//! Verify the engine's backward passes on a reduced detector with central
//! finite differences in 64-bit mode.
//!
//! ```bash
//! cargo run --release -p specsense --example gradient_check
//! ```

use specsense::detectnet::{build, DetectNetConfig, TrainItem};
use specsense::rng::RngStream;
use specsense::sigmod::{synth_dataset, DatasetSpec, ModScheme};
use specsense::tensornet::{grad_check, GradCheckConfig};

fn main() {
    let config = DetectNetConfig {
        sample_length: 32,
        conv_filters: 8,
        kernel: 5,
        lstm_cells: 16,
        fc1_units: 16,
        ..DetectNetConfig::full_scale(32)
    };
    let model = build::<f64>(&config, 99).unwrap();
    println!(
        "reduced detector: {} parameters across {} layers",
        model.param_count(),
        model.chain.layers().len()
    );

    let spec = DatasetSpec::new(vec![ModScheme::Qam16], 32, 5)
        .with_counts(8, 4, 4)
        .with_snr_grid(vec![0.0]);
    let frame = &synth_dataset(&spec).unwrap().train[0];
    let input = frame.input_tensor::<f64>();

    for seed in 0..3 {
        let report = grad_check(
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
        println!(
            "seed {seed}: checked {} coordinates, max relative error {:.3e}",
            report.checked, report.max_rel_error
        );
        if let Some(worst) = report.worst.first() {
            println!(
                "  worst: layer {} {}[{}], analytic {:.6e} vs numeric {:.6e}",
                worst.layer, worst.param, worst.index, worst.analytic, worst.numeric
            );
        }
    }

    // The checker must also catch a wrong gradient: corrupt one and rerun.
    let mut rng = RngStream::new(0);
    let (_, mut grads) = model
        .chain
        .loss_and_gradients(
            &model.params,
            &input,
            frame.label as usize,
            specsense::tensornet::Mode::Eval,
            &mut rng,
        )
        .unwrap();
    let dense = grads.len() - 2;
    grads[dense].get_mut("weight").unwrap().data_mut()[0] += 0.5;
    let report = specsense::tensornet::grad_check_against(
        &model.chain,
        &model.params,
        &input,
        frame.label as usize,
        &GradCheckConfig {
            samples: usize::MAX,
            step: 1e-5,
            seed: 0,
        },
        &grads,
    )
    .unwrap();
    println!(
        "negative control (corrupted dense gradient): max relative error {:.3e}",
        report.max_rel_error
    );
}
