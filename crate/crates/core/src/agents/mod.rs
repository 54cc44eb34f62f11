//! Value-based (DQN) and actor-critic (A2C) annotation agents.

pub mod a2c;
pub mod dqn;
pub mod exploration;
pub mod replay;
pub mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, StateVector};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, OptimizerKind};
use crate::sampling::DEFAULT_HORIZON;

pub use a2c::{a2c_advantage, a2c_update, A2cLearner};
pub use dqn::{dqn_td_target, dqn_update, DqnLearner};
pub use exploration::{epsilon_after, ExplorationConfig, ExplorationSchedule};
pub use replay::{ReplayBuffer, DEFAULT_REPLAY_CAPACITY};
pub use train::{train, train_with, CurvePoint, RngState, Snapshot, TrainOutcome, TrainSetup};

/// A transition with normalized states, as stored and replayed by the agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: StateVector,
    pub action: Action,
    pub reward: f64,
    pub next_state: StateVector,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    A2c,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::A2c => "a2c",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dqn" => Ok(AgentKind::Dqn),
            "a2c" => Ok(AgentKind::A2c),
            other => Err(format!("unknown agent `{other}` (expected dqn|a2c)")),
        }
    }
}

/// Hyperparameters for agent training. Defaults are the published settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub batch_size: usize,
    /// Environment steps between parameter updates.
    pub update_interval: usize,
    pub lr_q: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub eval_every: usize,
    pub replay_capacity: usize,
    /// Hidden layer widths (ReLU) shared by every agent network.
    pub hidden: Vec<usize>,
    pub horizon: usize,
    pub shuffle_episodes: bool,
    pub exploration: ExplorationConfig,
    /// Z-score states with training-split statistics.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            batch_size: 8,
            update_interval: 10,
            lr_q: 0.001,
            lr_actor: 0.001,
            lr_critic: 0.005,
            optimizer: OptimizerKind::Adam,
            epochs: 5000,
            eval_every: 100,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            hidden: vec![32, 32],
            horizon: DEFAULT_HORIZON,
            shuffle_episodes: true,
            exploration: ExplorationConfig::default(),
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // γ = 0 is admitted: it turns the TD target into plain reward regression.
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", format!("{} is outside [0, 1]", self.gamma)));
        }
        for (field, lr) in [
            ("lr_q", self.lr_q),
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::config(field, format!("{lr} must be positive")));
            }
        }
        for (field, n) in [
            ("batch_size", self.batch_size),
            ("update_interval", self.update_interval),
            ("eval_every", self.eval_every),
            ("replay_capacity", self.replay_capacity),
            ("horizon", self.horizon),
        ] {
            if n == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        let e = self.exploration;
        if !(0.0 <= e.floor && e.floor <= e.initial && e.initial <= 1.0 && 0.0 < e.decay && e.decay <= 1.0) {
            return Err(Error::config(
                "exploration",
                "need 0 <= floor <= initial <= 1 and 0 < decay <= 1",
            ));
        }
        Ok(())
    }

    /// `(width, activation)` stack: hidden ReLU layers then the given head.
    pub fn network_shape(&self, outputs: usize, head: Activation) -> Vec<(usize, Activation)> {
        self.hidden
            .iter()
            .map(|&w| (w, Activation::Relu))
            .chain(std::iter::once((outputs, head)))
            .collect()
    }
}

/// Two-element network output as an array.
pub(crate) fn pair(out: &[f64]) -> [f64; 2] {
    [out[0], out[1]]
}

/// ε-greedy choice over per-action preferences (Q-values or policy probabilities).
///
/// With probability ε an action is drawn uniformly; otherwise the greedy
/// action is taken, ties going to `NonAlarm`. The schedule is not advanced.
pub fn select_action<R: Rng + ?Sized>(preferences: [f64; 2], epsilon: f64, rng: &mut R) -> Action {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        Action::from_index(rng.random_range(0..2))
    } else {
        Action::argmax(preferences)
    }
}

/// Alarm probability implied by two Q-values.
pub fn q_score(q: [f64; 2]) -> f64 {
    crate::nn::softmax(&q)[1]
}

pub(crate) fn build_net<R: Rng + ?Sized>(
    config: &TrainConfig,
    outputs: usize,
    head: Activation,
    rng: &mut R,
) -> Result<DenseNet> {
    DenseNet::build(crate::ingest::VITALS_DIM, &config.network_shape(outputs, head), rng)
}
