//! Deep Q-network with uniform experience replay.
//!
//! There is no separate target network: bootstrap values come from the
//! online network's current parameters and are held constant during the
//! gradient step.

use rand::Rng;

use super::{build_net, pair, Experience, ReplayBuffer, TrainConfig};
use crate::env::{Action, StateVector};
use crate::error::Result;
use crate::nn::{Activation, DenseNet, Gradients, Optimizer};

/// `r + γ · max_a Q(s', a)`, or just `r` on a terminal transition.
pub fn dqn_td_target(experience: &Experience, q: &DenseNet, gamma: f64) -> Result<f64> {
    if experience.terminal {
        return Ok(experience.reward);
    }
    let next = q.forward(&experience.next_state)?;
    let best = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(experience.reward + gamma * best)
}

/// One minibatch regression step of the taken action's Q-value toward its TD target.
///
/// Returns `false` (and touches nothing) while the buffer holds fewer than
/// `batch_size` transitions.
pub fn dqn_update(
    q: &mut DenseNet,
    optimizer: &mut Optimizer,
    replay: &mut ReplayBuffer,
    config: &TrainConfig,
) -> Result<bool> {
    let Some(batch) = replay.sample(config.batch_size) else {
        return Ok(false);
    };
    let grads = dqn_gradients(q, &batch, config.gamma)?;
    optimizer.step(q, &grads)?;
    Ok(true)
}

/// Gradient of `mean_i (Q(s_i, a_i) − target_i)²` with targets frozen.
pub fn dqn_gradients(q: &DenseNet, batch: &[Experience], gamma: f64) -> Result<Gradients> {
    let targets = batch
        .iter()
        .map(|e| dqn_td_target(e, q, gamma))
        .collect::<Result<Vec<_>>>()?;
    let mut grads = Gradients::zeros_like(q);
    let n = batch.len() as f64;
    for (e, target) in batch.iter().zip(targets) {
        let trace = q.forward_trace(&e.state)?;
        let mut upstream = vec![0.0; q.output_dim()];
        let a = e.action.index();
        upstream[a] = 2.0 * (trace.output()[a] - target) / n;
        q.accumulate_backward(&trace, &upstream, &mut grads)?;
    }
    Ok(grads)
}

/// Mean squared TD error of `batch` under `q` (targets from `q` itself).
pub fn dqn_loss(q: &DenseNet, batch: &[Experience], gamma: f64) -> Result<f64> {
    let mut total = 0.0;
    for e in batch {
        let target = dqn_td_target(e, q, gamma)?;
        let value = q.forward(&e.state)?[e.action.index()];
        total += (value - target).powi(2);
    }
    Ok(total / batch.len() as f64)
}

/// A Q-network with its optimizer and replay memory.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    pub q: DenseNet,
    optimizer: Optimizer,
    replay: ReplayBuffer,
}

impl DqnLearner {
    pub fn new<R: Rng + ?Sized>(config: &TrainConfig, replay_seed: u64, rng: &mut R) -> Result<Self> {
        let q = build_net(config, 2, Activation::Linear, rng)?;
        let optimizer = Optimizer::new(config.optimizer, config.lr_q, &q);
        Ok(Self {
            q,
            optimizer,
            replay: ReplayBuffer::new(config.replay_capacity, replay_seed),
        })
    }

    pub fn q_values(&self, state: &StateVector) -> Result<[f64; 2]> {
        Ok(pair(&self.q.forward(state)?))
    }

    pub fn greedy(&self, state: &StateVector) -> Result<Action> {
        Ok(Action::argmax(self.q_values(state)?))
    }

    pub fn remember(&mut self, experience: Experience) {
        self.replay.push(experience);
    }

    pub fn update(&mut self, config: &TrainConfig) -> Result<bool> {
        dqn_update(&mut self.q, &mut self.optimizer, &mut self.replay, config)
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }
}
