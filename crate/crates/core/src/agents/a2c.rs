//! Advantage actor-critic.
//!
//! The critic regresses `V(s)` toward the one-step bootstrap target; the
//! actor ascends `log π(a|s) · advantage`, with the advantage computed from
//! the critic before either network moves.

use std::collections::VecDeque;

use rand::Rng;

use super::{build_net, pair, Experience, TrainConfig};
use crate::env::{Action, StateVector};
use crate::error::Result;
use crate::nn::{Activation, DenseNet, Gradients, Optimizer};

/// Smallest probability used when differentiating `log π`.
const MIN_PROB: f64 = 1e-12;

fn value(critic: &DenseNet, state: &StateVector) -> Result<f64> {
    Ok(critic.forward(state)?[0])
}

/// `r + γ V(s') − V(s)`, with `V(s') = 0` on terminal transitions.
pub fn a2c_advantage(experience: &Experience, critic: &DenseNet, gamma: f64) -> Result<f64> {
    let next = if experience.terminal {
        0.0
    } else {
        value(critic, &experience.next_state)?
    };
    Ok(experience.reward + gamma * next - value(critic, &experience.state)?)
}

/// One optimizer step for each network on `batch`.
///
/// Returns the advantages used for the actor update.
pub fn a2c_update(
    actor: &mut DenseNet,
    critic: &mut DenseNet,
    actor_optimizer: &mut Optimizer,
    critic_optimizer: &mut Optimizer,
    batch: &[Experience],
    gamma: f64,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let advantages = batch
        .iter()
        .map(|e| a2c_advantage(e, critic, gamma))
        .collect::<Result<Vec<_>>>()?;
    let n = batch.len() as f64;

    // Critic: mean squared advantage, bootstrap term held fixed, so
    // d/dV(s) = −2·advantage / n.
    let mut critic_grads = Gradients::zeros_like(critic);
    for (e, adv) in batch.iter().zip(&advantages) {
        let trace = critic.forward_trace(&e.state)?;
        critic.accumulate_backward(&trace, &[-2.0 * adv / n], &mut critic_grads)?;
    }

    // Actor: minimise −mean log π(a|s)·advantage.
    let mut actor_grads = Gradients::zeros_like(actor);
    for (e, adv) in batch.iter().zip(&advantages) {
        let trace = actor.forward_trace(&e.state)?;
        let a = e.action.index();
        let mut upstream = vec![0.0; actor.output_dim()];
        upstream[a] = -adv / (n * trace.output()[a].max(MIN_PROB));
        actor.accumulate_backward(&trace, &upstream, &mut actor_grads)?;
    }

    critic_optimizer.step(critic, &critic_grads)?;
    actor_optimizer.step(actor, &actor_grads)?;
    Ok(advantages)
}

/// Actor and critic networks with their optimizers and the recent-transition window.
#[derive(Debug, Clone)]
pub struct A2cLearner {
    pub actor: DenseNet,
    pub critic: DenseNet,
    actor_optimizer: Optimizer,
    critic_optimizer: Optimizer,
    recent: VecDeque<Experience>,
    window: usize,
}

impl A2cLearner {
    pub fn new<R: Rng + ?Sized>(config: &TrainConfig, rng: &mut R) -> Result<Self> {
        let actor = build_net(config, 2, Activation::Softmax, rng)?;
        let critic = build_net(config, 1, Activation::Linear, rng)?;
        Ok(Self {
            actor_optimizer: Optimizer::new(config.optimizer, config.lr_actor, &actor),
            critic_optimizer: Optimizer::new(config.optimizer, config.lr_critic, &critic),
            actor,
            critic,
            recent: VecDeque::with_capacity(config.batch_size),
            window: config.batch_size,
        })
    }

    pub fn policy(&self, state: &StateVector) -> Result<[f64; 2]> {
        Ok(pair(&self.actor.forward(state)?))
    }

    pub fn greedy(&self, state: &StateVector) -> Result<Action> {
        Ok(Action::argmax(self.policy(state)?))
    }

    /// Keeps the latest `batch_size` transitions.
    pub fn remember(&mut self, experience: Experience) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(experience);
    }

    /// Updates both networks on the retained window.
    pub fn update(&mut self, config: &TrainConfig) -> Result<bool> {
        if self.recent.is_empty() {
            return Ok(false);
        }
        let batch: Vec<Experience> = self.recent.iter().copied().collect();
        a2c_update(
            &mut self.actor,
            &mut self.critic,
            &mut self.actor_optimizer,
            &mut self.critic_optimizer,
            &batch,
            config.gamma,
        )?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, OptimizerKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_critic(v: f64) -> DenseNet {
        DenseNet::new(vec![Layer {
            inputs: 6,
            outputs: 1,
            activation: Activation::Linear,
            weights: vec![0.0; 6],
            bias: vec![v],
        }])
        .unwrap()
    }

    /// V(s) = s[0] exactly.
    fn first_input_critic() -> DenseNet {
        let mut weights = vec![0.0; 6];
        weights[0] = 1.0;
        DenseNet::new(vec![Layer {
            inputs: 6,
            outputs: 1,
            activation: Activation::Linear,
            weights,
            bias: vec![0.0],
        }])
        .unwrap()
    }

    fn exp(state0: f64, reward: f64, next0: f64, terminal: bool) -> Experience {
        Experience {
            state: [state0, 0.0, 0.0, 0.0, 0.0, 0.0],
            action: Action::Alarm,
            reward,
            next_state: [next0, 0.0, 0.0, 0.0, 0.0, 0.0],
            terminal,
        }
    }

    #[test]
    fn advantage_cases() {
        assert_eq!(
            a2c_advantage(&exp(1.0, 5.0, 2.0, false), &constant_critic(0.0), 0.9).unwrap(),
            5.0
        );
        let a = a2c_advantage(&exp(0.5, 2.0, 1.0, false), &first_input_critic(), 0.9).unwrap();
        assert!((a - 2.4).abs() < 1e-12);
        assert_eq!(
            a2c_advantage(&exp(3.0, 0.0, 9.0, true), &first_input_critic(), 0.9).unwrap(),
            -3.0
        );
    }

    fn learner(seed: u64) -> (DenseNet, DenseNet, Optimizer, Optimizer) {
        let config = TrainConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = build_net(&config, 2, Activation::Softmax, &mut rng).unwrap();
        let critic = build_net(&config, 1, Activation::Linear, &mut rng).unwrap();
        let ao = Optimizer::new(OptimizerKind::Adam, 0.001, &actor);
        let co = Optimizer::new(OptimizerKind::Adam, 0.005, &critic);
        (actor, critic, ao, co)
    }

    #[test]
    fn zero_advantage_leaves_actor() {
        let (mut actor, _, mut ao, _) = learner(1);
        // critic V ≡ 1, terminal reward 1 → advantage 0
        let mut critic = constant_critic(1.0);
        let mut co = Optimizer::new(OptimizerKind::Adam, 0.005, &critic);
        let before = actor.clone();
        let batch = [exp(0.3, 1.0, 0.0, true), exp(-0.4, 1.0, 0.0, true)];
        let adv = a2c_update(&mut actor, &mut critic, &mut ao, &mut co, &batch, 0.9).unwrap();
        assert!(adv.iter().all(|a| *a == 0.0));
        assert_eq!(actor, before);
    }

    #[test]
    fn positive_advantage_raises_probability() {
        let (mut actor, mut critic, mut ao, mut co) = learner(2);
        let e = Experience {
            state: [0.2, -0.5, 0.9, 0.0, 0.4, -1.0],
            action: Action::Alarm,
            reward: 10.0,
            next_state: [0.0; 6],
            terminal: true,
        };
        assert!(a2c_advantage(&e, &critic, 0.9).unwrap() > 0.0);
        let before = actor.forward(&e.state).unwrap()[1];
        a2c_update(&mut actor, &mut critic, &mut ao, &mut co, &[e], 0.9).unwrap();
        let after = actor.forward(&e.state).unwrap()[1];
        assert!(after > before, "{after} !> {before}");
    }

    #[test]
    fn critic_converges_on_fixed_batch() {
        let (mut actor, mut critic, mut ao, mut co) = learner(3);
        let s = |v: f64| [v, -v, 0.5 * v, 0.0, 0.1, -0.3];
        let batch: Vec<Experience> = [(0.1, 1.0), (0.7, 10.0), (-0.6, 0.0), (1.2, 1.0)]
            .iter()
            .enumerate()
            .map(|(i, &(x, r))| Experience {
                state: s(x),
                action: Action::from_index(i % 2),
                reward: r,
                next_state: s(-x),
                terminal: i == 3,
            })
            .collect();
        let mut worst = f64::INFINITY;
        for _ in 0..5000 {
            a2c_update(&mut actor, &mut critic, &mut ao, &mut co, &batch, 0.9).unwrap();
            worst = batch
                .iter()
                .map(|e| a2c_advantage(e, &critic, 0.9).unwrap().powi(2))
                .fold(0.0, f64::max);
            if worst < 1e-4 {
                break;
            }
        }
        assert!(worst < 1e-4, "squared advantage {worst}");
    }

    #[test]
    fn exact_critic_has_zero_mean_advantage_on_policy() {
        // Chain s0 → s1 → s2 → end; in every state the policy picks Alarm with
        // probability 0.3. Rewards: Alarm pays 2, NonAlarm pays 1 in s0;
        // 5/0 in s1; 1/3 in s2.
        let gamma = 0.9;
        let p = 0.3;
        let rewards = [[1.0, 2.0], [0.0, 5.0], [3.0, 1.0]];
        let expected: Vec<f64> = rewards.iter().map(|r| (1.0 - p) * r[0] + p * r[1]).collect();
        let v2 = expected[2];
        let v1 = expected[1] + gamma * v2;
        let v0 = expected[0] + gamma * v1;

        // one-hot states, critic weights are the exact values
        let mut weights = vec![0.0; 6];
        weights[..3].copy_from_slice(&[v0, v1, v2]);
        let critic = DenseNet::new(vec![Layer {
            inputs: 6,
            outputs: 1,
            activation: Activation::Linear,
            weights,
            bias: vec![0.0],
        }])
        .unwrap();
        let one_hot = |i: usize| {
            let mut s = [0.0; 6];
            s[i] = 1.0;
            s
        };

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut sum = 0.0;
        let mut count = 0;
        for _ in 0..20_000 {
            for (state, reward) in rewards.iter().enumerate() {
                let action = if rng.random_bool(p) {
                    Action::Alarm
                } else {
                    Action::NonAlarm
                };
                let e = Experience {
                    state: one_hot(state),
                    action,
                    reward: reward[action.index()],
                    next_state: one_hot((state + 1).min(2)),
                    terminal: state == 2,
                };
                sum += a2c_advantage(&e, &critic, gamma).unwrap();
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(mean.abs() < 0.05, "mean advantage {mean}");
    }

    #[test]
    fn window_keeps_latest() {
        let config = TrainConfig {
            batch_size: 3,
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut l = A2cLearner::new(&config, &mut rng).unwrap();
        for i in 0..5 {
            l.remember(exp(i as f64, i as f64, 0.0, false));
        }
        let rewards: Vec<f64> = l.recent.iter().map(|e| e.reward).collect();
        assert_eq!(rewards, [2.0, 3.0, 4.0]);
        assert!(l.update(&config).unwrap());
    }
}
