//! Multiplicatively decaying ε for ε-greedy action selection.

use serde::{Deserialize, Serialize};

pub const EPSILON_INITIAL: f64 = 1.0;
pub const EPSILON_FLOOR: f64 = 0.01;
pub const EPSILON_DECAY: f64 = 0.99975;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub initial: f64,
    pub floor: f64,
    /// Multiplier applied after every environment step.
    pub decay: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            initial: EPSILON_INITIAL,
            floor: EPSILON_FLOOR,
            decay: EPSILON_DECAY,
        }
    }
}

/// ε after `steps` decays: `max(floor, initial · decay^steps)`.
///
/// Computed in closed form from the step count so that long runs do not
/// accumulate rounding from repeated multiplication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    config: ExplorationConfig,
    steps: u64,
}

impl ExplorationSchedule {
    pub fn new(config: ExplorationConfig) -> Self {
        Self { config, steps: 0 }
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_after(&self.config, self.steps)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn decay(&mut self) {
        self.steps += 1;
    }
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self::new(ExplorationConfig::default())
    }
}

pub fn epsilon_after(config: &ExplorationConfig, steps: u64) -> f64 {
    (config.initial * config.decay.powf(steps as f64)).max(config.floor)
}
