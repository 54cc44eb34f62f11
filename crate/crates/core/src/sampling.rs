//! Class-imbalance downsampling around alarms, and episode segmentation.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AnnotatedEvent, Dataset};

/// Neighbourhood radii the mixed strategy draws from.
pub const MIXED_RADII: [usize; 5] = [0, 1, 3, 5, 10];

/// Default episode horizon, in events.
pub const DEFAULT_HORIZON: usize = 256;

/// Which non-alarm neighbours of each alarm survive downsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    N0,
    N1,
    N3,
    N5,
    N10,
    /// Per-alarm radius drawn uniformly from [`MIXED_RADII`].
    Mixed {
        seed: u64,
    },
}

impl SamplingStrategy {
    /// Fixed neighbourhood radius, `None` for the mixed strategy.
    pub fn radius(&self) -> Option<usize> {
        match self {
            SamplingStrategy::N0 => Some(0),
            SamplingStrategy::N1 => Some(1),
            SamplingStrategy::N3 => Some(3),
            SamplingStrategy::N5 => Some(5),
            SamplingStrategy::N10 => Some(10),
            SamplingStrategy::Mixed { .. } => None,
        }
    }

    /// Table label: `n-0`, `n-3`, `n-mixed`, ...
    pub fn range_label(&self) -> String {
        match self.radius() {
            Some(k) => format!("n-{k}"),
            None => "n-mixed".to_owned(),
        }
    }

    /// CLI spelling: `n0`, `n3`, `mixed`, ...
    pub fn flag(&self) -> String {
        match self.radius() {
            Some(k) => format!("n{k}"),
            None => "mixed".to_owned(),
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            SamplingStrategy::Mixed { .. } => SamplingStrategy::Mixed { seed },
            fixed => fixed,
        }
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.flag())
    }
}

/// Parses the CLI spelling; `mixed` gets seed 0 until [`SamplingStrategy::with_seed`].
impl FromStr for SamplingStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "n0" => Ok(SamplingStrategy::N0),
            "n1" => Ok(SamplingStrategy::N1),
            "n3" => Ok(SamplingStrategy::N3),
            "n5" => Ok(SamplingStrategy::N5),
            "n10" => Ok(SamplingStrategy::N10),
            "mixed" => Ok(SamplingStrategy::Mixed { seed: 0 }),
            other => Err(format!(
                "unknown downsampling `{other}` (expected n0|n1|n3|n5|n10|mixed)"
            )),
        }
    }
}

/// Indices of the events retained by `strategy`, ascending.
pub fn retained_indices(events: &[AnnotatedEvent], strategy: SamplingStrategy) -> Vec<usize> {
    let mut keep = vec![false; events.len()];
    let mut rng = match strategy {
        SamplingStrategy::Mixed { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    for (i, event) in events.iter().enumerate() {
        if !event.label.is_alarm() {
            continue;
        }
        let k = match (strategy.radius(), rng.as_mut()) {
            (Some(k), _) => k,
            (None, Some(rng)) => *MIXED_RADII.choose(rng).expect("non-empty"),
            (None, None) => unreachable!("mixed strategy always carries an rng"),
        };
        let lo = i.saturating_sub(k);
        let hi = (i + k).min(events.len() - 1);
        keep[lo..=hi].iter_mut().for_each(|slot| *slot = true);
    }
    keep.iter().enumerate().filter_map(|(i, &k)| k.then_some(i)).collect()
}

/// Keeps every alarm plus up to `k` events on either side of it.
///
/// Windows are positional and truncate at the sequence ends; overlapping
/// windows are merged, so each event appears at most once and in its
/// original order.
pub fn apply_downsampling(dataset: &Dataset, strategy: SamplingStrategy) -> Dataset {
    let events = retained_indices(&dataset.events, strategy)
        .into_iter()
        .map(|i| dataset.events[i])
        .collect();
    dataset.with_events(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub horizon: usize,
    pub shuffle_episodes: bool,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            shuffle_episodes: true,
            seed: 0,
        }
    }
}

/// Splits events into contiguous chunks of at most `horizon` events,
/// optionally shuffling chunk order with the config seed.
pub fn make_episodes<'a>(events: &'a [AnnotatedEvent], config: &EpisodeConfig) -> Result<Vec<&'a [AnnotatedEvent]>> {
    if config.horizon == 0 {
        return Err(Error::config("horizon", "must be at least 1"));
    }
    let mut episodes: Vec<_> = events.chunks(config.horizon).collect();
    if config.shuffle_episodes {
        episodes.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    }
    Ok(episodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{DatasetVariant, Resolution, SeverityClass, Split, VitalsSample};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn events(alarms: &[bool]) -> Vec<AnnotatedEvent> {
        alarms
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let sev = if a {
                    SeverityClass::Emergent
                } else {
                    SeverityClass::NoEvent
                };
                AnnotatedEvent::new(
                    i as i64,
                    VitalsSample::from_array([i as f64, 0.0, 0.0, 0.0, 0.0, 0.0]),
                    sev,
                )
            })
            .collect()
    }

    fn dataset(alarms: &[bool]) -> Dataset {
        Dataset::new(
            events(alarms),
            DatasetVariant::Ds1,
            Split::Train,
            Resolution::Millisecond,
        )
    }

    /// Brute force: every index within k of some alarm.
    fn oracle(alarms: &[bool], k: usize) -> BTreeSet<usize> {
        (0..alarms.len())
            .filter(|&i| (0..alarms.len()).any(|j| alarms[j] && (i as i64 - j as i64).unsigned_abs() as usize <= k))
            .collect()
    }

    #[test]
    fn n1_and_n0_windows() {
        let labels = [false, false, false, true, false, false];
        assert_eq!(retained_indices(&events(&labels), SamplingStrategy::N1), [2, 3, 4]);
        assert_eq!(retained_indices(&events(&labels), SamplingStrategy::N0), [3]);
    }

    #[test]
    fn overlapping_windows_deduplicated() {
        let mut labels = [false; 14];
        labels[5] = true;
        labels[7] = true;
        let kept = retained_indices(&events(&labels), SamplingStrategy::N3);
        let expected: Vec<usize> = oracle(&labels, 3).into_iter().collect();
        assert_eq!(kept, expected);
        assert_eq!(kept, (2..=10).collect::<Vec<_>>());
    }

    #[test]
    fn boundary_truncation() {
        let labels = [true, false, false];
        assert_eq!(retained_indices(&events(&labels), SamplingStrategy::N10), [0, 1, 2]);
    }

    #[test]
    fn parse_flags() {
        assert_eq!("n10".parse::<SamplingStrategy>().unwrap(), SamplingStrategy::N10);
        assert_eq!(
            "mixed".parse::<SamplingStrategy>().unwrap().with_seed(4),
            SamplingStrategy::Mixed { seed: 4 }
        );
        assert!("n2".parse::<SamplingStrategy>().is_err());
        assert_eq!(SamplingStrategy::Mixed { seed: 1 }.range_label(), "n-mixed");
    }

    #[test]
    fn episodes_partition() {
        let d = dataset(&[false; 10]);
        let cfg = EpisodeConfig {
            horizon: 4,
            shuffle_episodes: false,
            seed: 0,
        };
        let eps = make_episodes(&d.events, &cfg).unwrap();
        assert_eq!(eps.iter().map(|e| e.len()).collect::<Vec<_>>(), [4, 4, 2]);
        assert_eq!(eps.concat(), d.events);

        let shuffled = EpisodeConfig {
            shuffle_episodes: true,
            seed: 9,
            ..cfg
        };
        let a = make_episodes(&d.events, &shuffled).unwrap();
        let b = make_episodes(&d.events, &shuffled).unwrap();
        assert_eq!(a, b);

        let zero = EpisodeConfig { horizon: 0, ..cfg };
        assert!(make_episodes(&d.events, &zero).is_err());
    }

    fn strategies() -> impl Strategy<Value = SamplingStrategy> {
        prop_oneof![
            Just(SamplingStrategy::N0),
            Just(SamplingStrategy::N1),
            Just(SamplingStrategy::N3),
            Just(SamplingStrategy::N5),
            Just(SamplingStrategy::N10),
            any::<u64>().prop_map(|seed| SamplingStrategy::Mixed { seed }),
        ]
    }

    proptest! {
        #[test]
        fn fixed_radius_matches_oracle(labels in proptest::collection::vec(proptest::bool::weighted(0.1), 0..120),
                                       k in prop::sample::select(vec![0usize, 1, 3, 5, 10])) {
            let strategy = match k { 0 => SamplingStrategy::N0, 1 => SamplingStrategy::N1,
                3 => SamplingStrategy::N3, 5 => SamplingStrategy::N5, _ => SamplingStrategy::N10 };
            let kept: BTreeSet<usize> = retained_indices(&events(&labels), strategy).into_iter().collect();
            prop_assert_eq!(kept, oracle(&labels, k));
        }

        #[test]
        fn alarms_preserved_and_subsequence(labels in proptest::collection::vec(proptest::bool::weighted(0.1), 0..120),
                                            strategy in strategies()) {
            let d = dataset(&labels);
            let out = apply_downsampling(&d, strategy);
            prop_assert_eq!(out.class_counts().alarms, d.class_counts().alarms);
            // timestamps are indices here, so strictly increasing means subsequence
            prop_assert!(out.events.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
            for e in &out.events {
                prop_assert_eq!(*e, d.events[e.timestamp as usize]);
            }
            prop_assert_eq!(apply_downsampling(&d, strategy), out);
        }

        #[test]
        fn radius_monotone(labels in proptest::collection::vec(proptest::bool::weighted(0.1), 0..120)) {
            let ev = events(&labels);
            let order = [SamplingStrategy::N0, SamplingStrategy::N1, SamplingStrategy::N3,
                         SamplingStrategy::N5, SamplingStrategy::N10];
            for pair in order.windows(2) {
                let small: BTreeSet<_> = retained_indices(&ev, pair[0]).into_iter().collect();
                let large: BTreeSet<_> = retained_indices(&ev, pair[1]).into_iter().collect();
                prop_assert!(small.is_subset(&large));
            }
        }
    }
}
