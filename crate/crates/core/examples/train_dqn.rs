//! Train a DQN annotator on synthetic data and watch the held-out metrics.
//!
//! ```bash
//! cargo run --release --example train_dqn -- 60
//! ```

use std::ops::ControlFlow;

use alarm_annotator::agents::{train_with, AgentKind, TrainConfig, TrainSetup};
use alarm_annotator::env::{RewardScheme, VitalThresholds};
use alarm_annotator::eval::evaluate;
use alarm_annotator::ingest::Split;
use alarm_annotator::sampling::SamplingStrategy;
use alarm_annotator::synthgen::{generate, SynthConfig};

fn main() -> alarm_annotator::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(40);
    let t = VitalThresholds::default();
    let train = generate(&SynthConfig::new(2_000, 0.3, 1), &t)?.dataset(Split::Train)?;
    let test = generate(&SynthConfig::new(2_000, 0.3, 2), &t)?.dataset(Split::Test)?;

    let config = TrainConfig {
        epochs,
        eval_every: 10,
        ..TrainConfig::default()
    };
    let setup = TrainSetup {
        agent: AgentKind::Dqn,
        train: &train,
        strategy: SamplingStrategy::N10,
        reward: RewardScheme::SimpleMatch,
        config: &config,
        seed: 42,
        test: Some(&test),
    };

    println!(
        "{:>5} {:>8} {:>6} {:>6} {:>6}",
        "epoch", "epsilon", "sens", "spec", "auc"
    );
    let outcome = train_with(setup, |snap| {
        if let Some(r) = &snap.report {
            println!(
                "{:>5} {:>8.4} {:>6.3} {:>6.3} {:>6.3}",
                snap.epoch, snap.epsilon, r.sensitivity, r.specificity, r.auc
            );
        }
        ControlFlow::Continue(())
    })?;

    let first = outcome.curve.first().map_or(0.0, |p| p.avg_reward);
    let last = outcome.curve.last().map_or(0.0, |p| p.avg_reward);
    println!(
        "average episode reward {first:.1} -> {last:.1} over {} steps",
        outcome.steps
    );

    let report = evaluate(&outcome.annotator, &test, epochs)?;
    println!("final mcc {:.3}, weighted F1 {:.3}", report.mcc, report.weighted_f1);
    Ok(())
}
