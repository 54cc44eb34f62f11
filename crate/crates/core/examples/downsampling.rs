//! Shrink a heavily imbalanced stream with the n-k and mixed strategies,
//! then cut the result into training episodes.
//!
//! ```bash
//! cargo run --example downsampling
//! ```

use alarm_annotator::env::VitalThresholds;
use alarm_annotator::ingest::Split;
use alarm_annotator::sampling::{apply_downsampling, make_episodes, EpisodeConfig, SamplingStrategy};
use alarm_annotator::synthgen::{generate, SynthConfig};

fn main() -> alarm_annotator::Result<()> {
    let data = generate(&SynthConfig::new(20_000, 0.005, 11), &VitalThresholds::default())?;
    let full = data.dataset(Split::Train)?;
    let c = full.class_counts();
    println!("full split: {} alarms / {} non-alarms", c.alarms, c.non_alarms);

    println!("{:<8} {:>6} {:>8} {:>10}", "range", "rows", "alarms", "imbalance");
    for strategy in [
        SamplingStrategy::N0,
        SamplingStrategy::N1,
        SamplingStrategy::N3,
        SamplingStrategy::N5,
        SamplingStrategy::N10,
        SamplingStrategy::Mixed { seed: 3 },
    ] {
        let kept = apply_downsampling(&full, strategy);
        let c = kept.class_counts();
        println!(
            "{:<8} {:>6} {:>8} {:>9.1}:1",
            strategy.range_label(),
            kept.len(),
            c.alarms,
            c.non_alarms as f64 / c.alarms.max(1) as f64
        );
    }

    let kept = apply_downsampling(&full, SamplingStrategy::N10);
    let config = EpisodeConfig {
        horizon: 256,
        shuffle_episodes: true,
        seed: 5,
    };
    let episodes = make_episodes(&kept.events, &config)?;
    let lengths: Vec<usize> = episodes.iter().map(|e| e.len()).collect();
    println!("n-10 episodes (horizon {}): {lengths:?}", config.horizon);
    Ok(())
}
