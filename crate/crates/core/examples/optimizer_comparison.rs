//! Adam against RMSProp on the noisy task, three seeds each.
//!
//! ```bash
//! cargo run --release --example optimizer_comparison -- 40
//! ```

use alarm_annotator::agents::{train, AgentKind, TrainConfig, TrainSetup};
use alarm_annotator::env::{RewardScheme, VitalThresholds};
use alarm_annotator::eval::evaluate;
use alarm_annotator::ingest::Split;
use alarm_annotator::nn::OptimizerKind;
use alarm_annotator::sampling::SamplingStrategy;
use alarm_annotator::synthgen::{generate, SynthConfig};

fn variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

fn main() -> alarm_annotator::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let t = VitalThresholds::default();
    let mut synth = SynthConfig::new(2_000, 0.3, 21);
    synth.label_noise = 0.15;
    let train_set = generate(&synth, &t)?.dataset(Split::Train)?;
    synth.seed = 22;
    let test = generate(&synth, &t)?.dataset(Split::Test)?;

    for optimizer in [OptimizerKind::Adam, OptimizerKind::RmsProp] {
        let config = TrainConfig {
            epochs,
            optimizer,
            eval_every: epochs.max(1),
            ..TrainConfig::default()
        };
        let mut f1 = Vec::new();
        for seed in 0..3 {
            let outcome = train(TrainSetup {
                agent: AgentKind::Dqn,
                train: &train_set,
                strategy: SamplingStrategy::Mixed { seed },
                reward: RewardScheme::SimpleMatch,
                config: &config,
                seed,
                test: None,
            })?;
            f1.push(evaluate(&outcome.annotator, &test, epochs)?.weighted_f1);
        }
        println!("{optimizer:?}: weighted F1 {f1:.3?}, variance {:.5}", variance(&f1));
    }
    Ok(())
}
