//! Write a training run to disk, then reload its latest checkpoint and score
//! a few events with it.
//!
//! ```bash
//! cargo run --release --example run_directory
//! ```

use alarm_annotator::agents::{train, AgentKind, TrainConfig, TrainSetup};
use alarm_annotator::checkpoint::{
    config_hash, list_checkpoints, read_checkpoint, resolve_checkpoint, save_run, CheckpointRecord, Manifest,
    RunRecord, CURVE_FILE,
};
use alarm_annotator::env::{RewardScheme, VitalThresholds};
use alarm_annotator::eval::AlarmModel;
use alarm_annotator::ingest::Split;
use alarm_annotator::model::ModelKind;
use alarm_annotator::sampling::SamplingStrategy;
use alarm_annotator::synthgen::{generate, SynthConfig};

fn main() -> alarm_annotator::Result<()> {
    let t = VitalThresholds::default();
    let data = generate(&SynthConfig::new(1_000, 0.2, 5), &t)?.dataset(Split::Train)?;
    let config = TrainConfig {
        epochs: 6,
        eval_every: 2,
        ..TrainConfig::default()
    };
    let strategy = SamplingStrategy::N5;
    let seed = 17;
    let outcome = train(TrainSetup {
        agent: AgentKind::Dqn,
        train: &data,
        strategy,
        reward: RewardScheme::SimpleMatch,
        config: &config,
        seed,
        test: Some(&data),
    })?;

    let hash = config_hash(&config)?;
    let checkpoints = outcome
        .snapshots
        .iter()
        .map(|s| CheckpointRecord {
            manifest: Manifest {
                agent: ModelKind::Dqn,
                epoch: s.epoch,
                epsilon: Some(s.epsilon),
                steps: Some(s.steps),
                rng_state: Some(s.rng_state.clone()),
                config_hash: hash.clone(),
                seed,
                normalizer: *s.annotator.normalizer(),
                downsample: strategy.flag(),
                reward: Some("simple".into()),
            },
            annotator: &s.annotator,
        })
        .collect();
    let record = RunRecord {
        curve_header: "avg_reward",
        curve: outcome.curve.iter().map(|p| (p.epoch, p.avg_reward)).collect(),
        checkpoints,
        reports: outcome.snapshots.iter().filter_map(|s| s.report).collect(),
    };

    let scratch = tempfile::tempdir()?;
    let run = scratch.path().join("dqn_run");
    save_run(&run, &record)?;
    print!("{}", std::fs::read_to_string(run.join(CURVE_FILE))?);
    for dir in list_checkpoints(&run)? {
        println!("checkpoint {}", dir.file_name().unwrap_or_default().to_string_lossy());
    }

    let (manifest, annotator) = read_checkpoint(&resolve_checkpoint(&run)?)?;
    println!(
        "latest: epoch {} epsilon {:?} hash {}",
        manifest.epoch,
        manifest.epsilon,
        &manifest.config_hash[..12]
    );
    for e in data.events.iter().take(3) {
        println!(
            "  {:?} score {:.3} -> {:?}",
            e.label,
            annotator.score(&e.vitals),
            annotator.predict(&e.vitals)
        );
    }
    Ok(())
}
