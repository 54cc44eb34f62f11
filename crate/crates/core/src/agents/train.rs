//! Episode loop shared by both agents.

use std::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{select_action, A2cLearner, AgentKind, DqnLearner, Experience, ExplorationSchedule, TrainConfig};
use crate::env::{Action, AnnotationEnv, Normalizer, RewardScheme, StateVector};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::ingest::Dataset;
use crate::model::{Annotator, Policy};
use crate::sampling::{apply_downsampling, make_episodes, EpisodeConfig, SamplingStrategy};

const STREAM_INIT: u64 = 1;
const STREAM_REPLAY: u64 = 2;
const STREAM_ACTION: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;

/// SplitMix64 finalizer over `seed` and a stream tag.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Average reward per episode after an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    /// Mean over the epoch's episodes of the undiscounted episode return.
    pub avg_reward: f64,
}

/// Position of the action-selection generator, enough to resume it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    /// ChaCha8 key, hex encoded.
    pub seed: String,
    /// Word position in the keystream, as a decimal string.
    pub word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: hex::encode(rng.get_seed()),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = |what: &str| Error::config("rng_state", format!("invalid {what}"));
        let bytes = hex::decode(&self.seed).map_err(|_| bad("seed"))?;
        let seed: [u8; 32] = bytes.try_into().map_err(|_| bad("seed length"))?;
        let pos: u128 = self.word_pos.parse().map_err(|_| bad("word position"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// The model as it stood after `epoch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub epoch: usize,
    pub epsilon: f64,
    pub steps: u64,
    pub rng_state: RngState,
    pub annotator: Annotator,
    /// Held-out evaluation, when a test split was supplied.
    pub report: Option<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub annotator: Annotator,
    pub curve: Vec<CurvePoint>,
    pub snapshots: Vec<Snapshot>,
    pub steps: u64,
    /// The observer asked to stop before the epoch budget ran out.
    pub stopped_early: bool,
}

/// Everything one training run depends on.
#[derive(Debug, Clone, Copy)]
pub struct TrainSetup<'a> {
    pub agent: AgentKind,
    pub train: &'a Dataset,
    pub strategy: SamplingStrategy,
    pub reward: RewardScheme,
    pub config: &'a TrainConfig,
    pub seed: u64,
    /// Evaluated at every snapshot.
    pub test: Option<&'a Dataset>,
}

#[allow(clippy::large_enum_variant)]
enum Learner {
    Dqn(DqnLearner),
    A2c(A2cLearner),
}

impl Learner {
    fn preferences(&self, state: &StateVector) -> Result<[f64; 2]> {
        match self {
            Learner::Dqn(l) => l.q_values(state),
            Learner::A2c(l) => l.policy(state),
        }
    }

    fn remember(&mut self, e: Experience) {
        match self {
            Learner::Dqn(l) => l.remember(e),
            Learner::A2c(l) => l.remember(e),
        }
    }

    fn update(&mut self, config: &TrainConfig) -> Result<bool> {
        match self {
            Learner::Dqn(l) => l.update(config),
            Learner::A2c(l) => l.update(config),
        }
    }

    fn policy(&self) -> Policy {
        match self {
            Learner::Dqn(l) => Policy::Dqn { q: l.q.clone() },
            Learner::A2c(l) => Policy::A2c {
                actor: l.actor.clone(),
                critic: l.critic.clone(),
            },
        }
    }
}

pub fn train(setup: TrainSetup<'_>) -> Result<TrainOutcome> {
    train_with(setup, |_| ControlFlow::Continue(()))
}

/// Trains, handing each snapshot to `observer`; `Break` ends training after that snapshot.
///
/// State statistics come from the full training split; episodes are cut
/// from the downsampled rows and reshuffled every epoch. ε decays once per
/// environment step and the learner updates every `update_interval` steps.
pub fn train_with<F>(setup: TrainSetup<'_>, mut observer: F) -> Result<TrainOutcome>
where
    F: FnMut(&Snapshot) -> ControlFlow<()>,
{
    let TrainSetup {
        agent,
        train,
        strategy,
        reward,
        config,
        seed,
        test,
    } = setup;
    config.validate()?;
    let normalizer = if config.normalize {
        Normalizer::fit(train.vitals())
    } else {
        Normalizer::identity()
    };
    let data = apply_downsampling(train, strategy);
    if data.is_empty() {
        return Err(Error::DegenerateData("no training rows after downsampling".into()));
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT));
    let mut learner = match agent {
        AgentKind::Dqn => Learner::Dqn(DqnLearner::new(
            config,
            derive_seed(seed, STREAM_REPLAY),
            &mut init_rng,
        )?),
        AgentKind::A2c => Learner::A2c(A2cLearner::new(config, &mut init_rng)?),
    };
    let mut action_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_ACTION));
    let shuffle_seed = derive_seed(seed, STREAM_SHUFFLE);
    let mut schedule = ExplorationSchedule::new(config.exploration);

    let mut curve = Vec::with_capacity(config.epochs);
    let mut snapshots = Vec::new();
    let mut steps: u64 = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        let episodes = make_episodes(
            &data.events,
            &EpisodeConfig {
                horizon: config.horizon,
                shuffle_episodes: config.shuffle_episodes,
                seed: derive_seed(shuffle_seed, epoch as u64),
            },
        )?;
        let mut total_return = 0.0;
        for episode in &episodes {
            let mut env = AnnotationEnv::new(episode, reward, &normalizer);
            let mut observation = env.reset();
            while let Some(state) = observation {
                let prefs = learner.preferences(&state)?;
                let action: Action = select_action(prefs, schedule.epsilon(), &mut action_rng);
                let step = env.step(action)?;
                let t = step.transition;
                learner.remember(Experience {
                    state,
                    action,
                    reward: t.reward,
                    next_state: step.next_observation.unwrap_or(state),
                    terminal: t.terminal,
                });
                total_return += t.reward;
                steps += 1;
                schedule.decay();
                if steps.is_multiple_of(config.update_interval as u64) {
                    learner.update(config)?;
                }
                observation = step.next_observation;
            }
        }
        curve.push(CurvePoint {
            epoch,
            avg_reward: total_return / episodes.len() as f64,
        });

        if epoch % config.eval_every == 0 || epoch == config.epochs {
            let annotator = Annotator::new(learner.policy(), normalizer)?;
            let report = test.map(|t| evaluate(&annotator, t, epoch)).transpose()?;
            let snapshot = Snapshot {
                epoch,
                epsilon: schedule.epsilon(),
                steps,
                rng_state: RngState::capture(&action_rng),
                annotator,
                report,
            };
            let flow = observer(&snapshot);
            snapshots.push(snapshot);
            if flow.is_break() {
                stopped_early = epoch < config.epochs;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        annotator: Annotator::new(learner.policy(), normalizer)?,
        curve,
        snapshots,
        steps,
        stopped_early,
    })
}
