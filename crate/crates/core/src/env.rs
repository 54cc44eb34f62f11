//! The annotation MDP.
//!
//! States are vitals samples, actions are {non-alarm, alarm}, and an episode
//! walks a contiguous run of annotated events in time order. Two reward
//! schemes are available: a label-match reward and a sigmoid band score over
//! heart rate and blood pressure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AnnotatedEvent, BinaryLabel, VitalsSample, VITALS_DIM};

/// Normalized agent observation.
pub type StateVector = [f64; VITALS_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    NonAlarm = 0,
    Alarm = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::NonAlarm, Action::Alarm];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::NonAlarm
        } else {
            Action::Alarm
        }
    }

    pub fn as_label(self) -> BinaryLabel {
        match self {
            Action::NonAlarm => BinaryLabel::NonAlarm,
            Action::Alarm => BinaryLabel::Alarm,
        }
    }

    /// Greedy choice over per-action values; ties go to `NonAlarm`.
    pub fn argmax(values: [f64; 2]) -> Self {
        if values[1] > values[0] {
            Action::Alarm
        } else {
            Action::NonAlarm
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub max: f64,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

/// Normal ranges for heart rate and systolic/diastolic pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VitalThresholds {
    pub hr: Band,
    pub sbp: Band,
    pub dbp: Band,
}

impl Default for VitalThresholds {
    fn default() -> Self {
        Self {
            hr: Band { min: 60.0, max: 120.0 },
            sbp: Band { min: 90.0, max: 200.0 },
            dbp: Band { min: 60.0, max: 140.0 },
        }
    }
}

impl VitalThresholds {
    pub fn new(hr: Band, sbp: Band, dbp: Band) -> Result<Self> {
        let t = Self { hr, sbp, dbp };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, band) in self.bands() {
            if !(band.min.is_finite() && band.max.is_finite() && band.min < band.max) {
                return Err(Error::config(
                    name,
                    format!("band [{}, {}] must satisfy min < max", band.min, band.max),
                ));
            }
        }
        Ok(())
    }

    pub fn bands(&self) -> [(&'static str, Band); 3] {
        [("hr", self.hr), ("sbp", self.sbp), ("dbp", self.dbp)]
    }

    /// `(value, band)` for each monitored variable of `s`.
    pub fn monitored(&self, s: &VitalsSample) -> [(f64, Band); 3] {
        [(s.hr, self.hr), (s.sbp, self.sbp), (s.dbp, self.dbp)]
    }

    /// True when any monitored variable leaves its band.
    pub fn violates(&self, s: &VitalsSample) -> bool {
        self.monitored(s).iter().any(|(v, band)| !band.contains(*v))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }
}

pub const SIGMOID_SLOPE: f64 = 50.0;
pub const NORMALCY_SCALE: f64 = 5.0;
/// Maximum of [`normalcy_score`]: every monitored variable well inside its band.
pub const NORMALCY_MAX: f64 = NORMALCY_SCALE * 3.0 * 1.5;

pub const REWARD_CORRECT_NON_ALARM: f64 = 1.0;
pub const REWARD_CORRECT_ALARM: f64 = 10.0;
pub const REWARD_INCORRECT: f64 = 0.0;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `5 · Σ_{v ∈ {HR, SBP, DBP}} [σ(50 (v − v_min)) − σ(50 (v − v_max)) + ½]`.
///
/// Ranges from 7.5 (all far outside their bands) to 22.5 (all well inside).
pub fn normalcy_score(s: &VitalsSample, thresholds: &VitalThresholds) -> f64 {
    let sum: f64 = thresholds
        .monitored(s)
        .iter()
        .map(|(v, band)| sigmoid(SIGMOID_SLOPE * (v - band.min)) - sigmoid(SIGMOID_SLOPE * (v - band.max)) + 0.5)
        .sum();
    NORMALCY_SCALE * sum
}

/// How the action-independent normalcy score becomes an action reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// `f(s)` for declaring non-alarm, `22.5 − f(s)` for declaring alarm.
    Mirror,
    /// `f(s)` regardless of the action.
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum RewardScheme {
    /// 10 for a correct alarm, 1 for a correct non-alarm, 0 otherwise.
    SimpleMatch,
    VitalsSigmoid {
        thresholds: VitalThresholds,
        action_mode: ActionMode,
    },
}

impl RewardScheme {
    pub fn vitals(thresholds: VitalThresholds) -> Self {
        RewardScheme::VitalsSigmoid {
            thresholds,
            action_mode: ActionMode::Mirror,
        }
    }

    pub fn flag(&self) -> &'static str {
        match self {
            RewardScheme::SimpleMatch => "simple",
            RewardScheme::VitalsSigmoid { .. } => "vitals",
        }
    }

    pub fn reward(&self, event: &AnnotatedEvent, action: Action) -> f64 {
        match *self {
            RewardScheme::SimpleMatch => match (action, event.label) {
                (Action::Alarm, BinaryLabel::Alarm) => REWARD_CORRECT_ALARM,
                (Action::NonAlarm, BinaryLabel::NonAlarm) => REWARD_CORRECT_NON_ALARM,
                _ => REWARD_INCORRECT,
            },
            RewardScheme::VitalsSigmoid {
                thresholds,
                action_mode,
            } => {
                let f = normalcy_score(&event.vitals, &thresholds);
                match (action_mode, action) {
                    (ActionMode::Ignore, _) | (ActionMode::Mirror, Action::NonAlarm) => f,
                    (ActionMode::Mirror, Action::Alarm) => NORMALCY_MAX - f,
                }
            }
        }
    }
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

/// `simple` or `vitals` (default thresholds, mirror mode).
impl FromStr for RewardScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "simple" => Ok(RewardScheme::SimpleMatch),
            "vitals" => Ok(RewardScheme::vitals(VitalThresholds::default())),
            other => Err(format!("unknown reward `{other}` (expected simple|vitals)")),
        }
    }
}

/// Per-field z-score statistics, fitted on training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; VITALS_DIM],
    pub std: [f64; VITALS_DIM],
}

impl Normalizer {
    /// Pass-through: raw vitals become the state.
    pub fn identity() -> Self {
        Self {
            mean: [0.0; VITALS_DIM],
            std: [1.0; VITALS_DIM],
        }
    }

    /// Population mean and standard deviation of each field.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a VitalsSample>) -> Self {
        let mut n = 0usize;
        let mut sum = [0.0; VITALS_DIM];
        let rows: Vec<[f64; VITALS_DIM]> = samples.into_iter().map(|s| s.to_array()).collect();
        for row in &rows {
            n += 1;
            sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
        }
        if n == 0 {
            return Self::identity();
        }
        let mean = sum.map(|s| s / n as f64);
        let mut var = [0.0; VITALS_DIM];
        for row in &rows {
            for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        Self {
            mean,
            std: var.map(|v| (v / n as f64).sqrt()),
        }
    }

    /// Z-scores; fields with zero spread map to 0.
    pub fn transform(&self, s: &VitalsSample) -> StateVector {
        let raw = s.to_array();
        std::array::from_fn(|i| {
            if self.std[i] > 0.0 {
                (raw[i] - self.mean[i]) / self.std[i]
            } else {
                0.0
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: VitalsSample,
    pub action: Action,
    pub reward: f64,
    /// Equal to `state` on terminal transitions; never bootstrapped from.
    pub next_state: VitalsSample,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub transition: Transition,
    /// Observation of the next event, `None` once the episode is over.
    pub next_observation: Option<StateVector>,
}

/// One episode of annotated events played as an environment.
#[derive(Debug, Clone)]
pub struct AnnotationEnv<'a> {
    episode: &'a [AnnotatedEvent],
    cursor: usize,
    reward: RewardScheme,
    normalizer: &'a Normalizer,
}

impl<'a> AnnotationEnv<'a> {
    pub fn new(episode: &'a [AnnotatedEvent], reward: RewardScheme, normalizer: &'a Normalizer) -> Self {
        Self {
            episode,
            cursor: 0,
            reward,
            normalizer,
        }
    }

    pub fn len(&self) -> usize {
        self.episode.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episode.is_empty()
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.episode.len()
    }

    /// Rewinds to the first event and returns its observation.
    pub fn reset(&mut self) -> Option<StateVector> {
        self.cursor = 0;
        self.observation()
    }

    pub fn observation(&self) -> Option<StateVector> {
        self.episode
            .get(self.cursor)
            .map(|e| self.normalizer.transform(&e.vitals))
    }

    pub fn current_event(&self) -> Option<&'a AnnotatedEvent> {
        self.episode.get(self.cursor)
    }

    pub fn step(&mut self, action: Action) -> Result<Step> {
        let event = self.episode.get(self.cursor).ok_or(Error::EpisodeTerminated)?;
        self.cursor += 1;
        let next = self.episode.get(self.cursor);
        let transition = Transition {
            state: event.vitals,
            action,
            reward: self.reward.reward(event, action),
            next_state: next.map_or(event.vitals, |e| e.vitals),
            terminal: next.is_none(),
        };
        Ok(Step {
            transition,
            next_observation: next.map(|e| self.normalizer.transform(&e.vitals)),
        })
    }
}
