//! Train both agents on two downsampling ranges, keep each run's top-3
//! snapshots by AUC and print the comparison table.
//!
//! ```bash
//! cargo run --release --example benchmark_table
//! ```

use alarm_annotator::agents::{train, AgentKind, TrainConfig, TrainSetup};
use alarm_annotator::env::{RewardScheme, VitalThresholds};
use alarm_annotator::eval::{sort_rows, top_k_reports, write_table_csv, TableRow};
use alarm_annotator::ingest::Split;
use alarm_annotator::sampling::SamplingStrategy;
use alarm_annotator::synthgen::{generate, SynthConfig};

fn main() -> alarm_annotator::Result<()> {
    let t = VitalThresholds::default();
    let train_set = generate(&SynthConfig::new(4_000, 0.05, 31), &t)?.dataset(Split::Train)?;
    let test = generate(&SynthConfig::new(4_000, 0.05, 32), &t)?.dataset(Split::Test)?;
    let config = TrainConfig {
        epochs: 30,
        eval_every: 5,
        ..TrainConfig::default()
    };

    let mut rows = Vec::new();
    for strategy in [SamplingStrategy::N10, SamplingStrategy::N3] {
        for agent in [AgentKind::Dqn, AgentKind::A2c] {
            let outcome = train(TrainSetup {
                agent,
                train: &train_set,
                strategy,
                reward: RewardScheme::SimpleMatch,
                config: &config,
                seed: 9,
                test: Some(&test),
            })?;
            let reports: Vec<_> = outcome.snapshots.iter().filter_map(|s| s.report).collect();
            let label = agent.as_str().to_uppercase();
            for r in top_k_reports(&reports, 3)?.reports {
                rows.push(TableRow::new(&label, strategy.range_label(), &r));
            }
        }
    }
    sort_rows(&mut rows);
    write_table_csv(&rows, std::io::stdout().lock())
}
