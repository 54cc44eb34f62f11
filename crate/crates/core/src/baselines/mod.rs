//! Supervised baselines: a small MLP and a linear max-margin classifier.

pub mod linear;
pub mod mlp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{Normalizer, StateVector};
use crate::error::{Error, Result};
use crate::ingest::{ClassCounts, Dataset};
use crate::model::Annotator;
use crate::sampling::{apply_downsampling, SamplingStrategy};

pub use linear::{linear_train, LinearClassifier, LinearConfig};
pub use mlp::{mlp_train, MlpConfig};

/// How per-class loss weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// Every sample weighs 1.
    Unit,
    /// Alarm samples weigh `r`, non-alarm samples weigh 1.
    AlarmRatio(f64),
    /// `n_total / (2 · n_class)` for each class.
    Balanced,
}

impl ClassWeighting {
    /// Default alarm:non-alarm ratio for each downsampling setting.
    pub fn default_for(strategy: SamplingStrategy) -> Self {
        match strategy {
            SamplingStrategy::N0 | SamplingStrategy::N1 => ClassWeighting::Unit,
            SamplingStrategy::N3 | SamplingStrategy::N5 | SamplingStrategy::Mixed { .. } => {
                ClassWeighting::AlarmRatio(20.0)
            }
            SamplingStrategy::N10 => ClassWeighting::AlarmRatio(40.0),
        }
    }

    /// `[non_alarm, alarm]` weights for the given class counts.
    pub fn resolve(&self, counts: ClassCounts) -> Result<[f64; 2]> {
        match *self {
            ClassWeighting::Unit => Ok([1.0, 1.0]),
            ClassWeighting::AlarmRatio(r) if r.is_finite() && r > 0.0 => Ok([1.0, r]),
            ClassWeighting::AlarmRatio(r) => Err(Error::config("class_weight", format!("ratio {r} must be positive"))),
            ClassWeighting::Balanced => {
                if counts.alarms == 0 || counts.non_alarms == 0 {
                    return Err(Error::DegenerateData("balanced weights need both classes".into()));
                }
                let total = counts.total() as f64;
                Ok([
                    total / (2.0 * counts.non_alarms as f64),
                    total / (2.0 * counts.alarms as f64),
                ])
            }
        }
    }
}

impl fmt::Display for ClassWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassWeighting::Unit => f.write_str("1:1"),
            ClassWeighting::AlarmRatio(r) => write!(f, "{r}:1"),
            ClassWeighting::Balanced => f.write_str("balanced"),
        }
    }
}

/// `balanced`, `unit`, or an `alarm:non_alarm` ratio such as `20:1`.
impl FromStr for ClassWeighting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "balanced" => return Ok(ClassWeighting::Balanced),
            "unit" | "none" => return Ok(ClassWeighting::Unit),
            _ => {}
        }
        let (a, n) = s.split_once(':').unwrap_or((s, "1"));
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x > 0.0)
                .ok_or_else(|| format!("bad class weight `{s}` (expected balanced or A:N)"))
        };
        let ratio = parse(a)? / parse(n)?;
        Ok(if ratio == 1.0 {
            ClassWeighting::Unit
        } else {
            ClassWeighting::AlarmRatio(ratio)
        })
    }
}

/// Loss after each training epoch (or iteration, for the linear model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub loss: f64,
}

/// A fitted baseline and its loss trajectory.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub annotator: Annotator,
    pub curve: Vec<LossPoint>,
    /// Training stopped on its convergence criterion rather than the epoch cap.
    pub converged: bool,
}

/// Normalized, downsampled training rows.
pub(crate) struct FitData {
    pub normalizer: Normalizer,
    pub states: Vec<StateVector>,
    /// 0 for non-alarm, 1 for alarm.
    pub classes: Vec<usize>,
    pub weights: [f64; 2],
}

/// Fits the normalizer on the full split, then downsamples around alarms
/// unless `strategy` is `None`.
pub(crate) fn prepare(
    train: &Dataset,
    strategy: Option<SamplingStrategy>,
    weighting: ClassWeighting,
    normalize: bool,
) -> Result<FitData> {
    let normalizer = if normalize {
        Normalizer::fit(train.vitals())
    } else {
        Normalizer::identity()
    };
    let data = match strategy {
        Some(strategy) => apply_downsampling(train, strategy),
        None => train.clone(),
    };
    if data.is_empty() {
        return Err(Error::DegenerateData("no training rows".into()));
    }
    let weights = weighting.resolve(data.class_counts())?;
    Ok(FitData {
        states: data.events.iter().map(|e| normalizer.transform(&e.vitals)).collect(),
        classes: data.events.iter().map(|e| e.label.as_u8() as usize).collect(),
        normalizer,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_weights() {
        assert_eq!(
            "20:1".parse::<ClassWeighting>().unwrap(),
            ClassWeighting::AlarmRatio(20.0)
        );
        assert_eq!(
            "40".parse::<ClassWeighting>().unwrap(),
            ClassWeighting::AlarmRatio(40.0)
        );
        assert_eq!("1:1".parse::<ClassWeighting>().unwrap(), ClassWeighting::Unit);
        assert_eq!("balanced".parse::<ClassWeighting>().unwrap(), ClassWeighting::Balanced);
        assert!("0:1".parse::<ClassWeighting>().is_err());
        assert!("x".parse::<ClassWeighting>().is_err());
    }

    #[test]
    fn balanced_weights() {
        let counts = ClassCounts {
            alarms: 10,
            non_alarms: 390,
        };
        let w = ClassWeighting::Balanced.resolve(counts).unwrap();
        assert!((w[0] - 400.0 / 780.0).abs() < 1e-12);
        assert!((w[1] - 20.0).abs() < 1e-12);
        // each class contributes equal total weight
        assert!((w[0] * 390.0 - w[1] * 10.0).abs() < 1e-9);
        let one_class = ClassCounts {
            alarms: 0,
            non_alarms: 5,
        };
        assert!(ClassWeighting::Balanced.resolve(one_class).is_err());
    }

    #[test]
    fn defaults_by_strategy() {
        assert_eq!(ClassWeighting::default_for(SamplingStrategy::N0), ClassWeighting::Unit);
        assert_eq!(
            ClassWeighting::default_for(SamplingStrategy::N10),
            ClassWeighting::AlarmRatio(40.0)
        );
    }
}
