//! Supervised baselines on a 1:40 imbalanced stream: an MLP and a linear
//! max-margin classifier, each with and without class weighting.
//!
//! ```bash
//! cargo run --release --example baselines
//! ```

use alarm_annotator::baselines::{linear_train, mlp_train, ClassWeighting, LinearConfig, MlpConfig};
use alarm_annotator::env::VitalThresholds;
use alarm_annotator::eval::evaluate;
use alarm_annotator::ingest::Split;
use alarm_annotator::sampling::SamplingStrategy;
use alarm_annotator::synthgen::{generate, SynthConfig};

fn main() -> alarm_annotator::Result<()> {
    let t = VitalThresholds::default();
    let mut config = SynthConfig::new(8_200, 1.0 / 41.0, 3);
    config.label_noise = 0.02;
    let train = generate(&config, &t)?.dataset(Split::Train)?;
    config.seed = 4;
    let test = generate(&config, &t)?.dataset(Split::Test)?;
    let strategy = SamplingStrategy::N10;

    let mlp = MlpConfig {
        max_epochs: 300,
        ..MlpConfig::default()
    };
    let linear = LinearConfig::default();
    let weightings = [
        ClassWeighting::Unit,
        ClassWeighting::default_for(strategy),
        ClassWeighting::Balanced,
    ];

    println!(
        "{:<7} {:<9} {:>6} {:>6} {:>6} {:>7}",
        "model", "weights", "sens", "spec", "auc", "epochs"
    );
    for weighting in weightings {
        let fit = mlp_train(&train, strategy, weighting, 0, &mlp)?;
        let r = evaluate(&fit.annotator, &test, 0)?;
        println!(
            "{:<7} {:<9} {:>6.3} {:>6.3} {:>6.3} {:>7}",
            "mlp",
            weighting.to_string(),
            r.sensitivity,
            r.specificity,
            r.auc,
            fit.curve.len()
        );
        let fit = linear_train(&train, strategy, weighting, 0, &linear)?;
        let r = evaluate(&fit.annotator, &test, 0)?;
        println!(
            "{:<7} {:<9} {:>6.3} {:>6.3} {:>6.3} {:>7}",
            "linear",
            weighting.to_string(),
            r.sensitivity,
            r.specificity,
            r.auc,
            fit.curve.len()
        );
    }
    Ok(())
}
