//! Multilayer perceptron trained with class-weighted cross-entropy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{prepare, ClassWeighting, FitOutcome, LossPoint};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, VITALS_DIM};
use crate::model::{Annotator, Policy};
use crate::nn::{cross_entropy, cross_entropy_gradient, Activation, DenseNet, Gradients, Optimizer, OptimizerKind};
use crate::sampling::SamplingStrategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Hidden widths, all with tanh.
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive epochs without sufficient improvement before stopping.
    pub patience: usize,
    /// Minimum relative loss improvement that resets the patience counter.
    pub tolerance: f64,
    pub normalize: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![20, 4],
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 5000,
            patience: 20,
            tolerance: 1e-6,
            normalize: true,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        Ok(())
    }

    fn shape(&self) -> Vec<(usize, Activation)> {
        self.hidden
            .iter()
            .map(|&w| (w, Activation::Tanh))
            .chain(std::iter::once((2, Activation::Softmax)))
            .collect()
    }
}

/// Mini-batch training with early stopping on the epoch loss.
///
/// Rows are downsampled with `strategy` first; pass `None` to train on the
/// dataset as given.
///
/// The epoch loss is the weighted cross-entropy summed over the epoch's
/// batches and divided by the row count.
pub fn mlp_train(
    train: &Dataset,
    strategy: impl Into<Option<SamplingStrategy>>,
    weighting: ClassWeighting,
    seed: u64,
    config: &MlpConfig,
) -> Result<FitOutcome> {
    config.validate()?;
    let data = prepare(train, strategy.into(), weighting, config.normalize)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DenseNet::build(VITALS_DIM, &config.shape(), &mut rng)?;
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &net);

    let n = data.states.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut converged = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(&net);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let class = data.classes[i];
                let w = data.weights[class];
                let trace = net.forward_trace(&data.states[i])?;
                total += w * cross_entropy(trace.output(), class)?;
                let upstream = cross_entropy_gradient(trace.output(), class, w * scale);
                net.accumulate_backward(&trace, &upstream, &mut grads)?;
            }
            optimizer.step(&mut net, &grads)?;
        }
        let loss = total / n as f64;
        curve.push(LossPoint { epoch, loss });
        if loss < best * (1.0 - config.tolerance) {
            stale = 0;
        } else {
            stale += 1;
        }
        best = best.min(loss);
        if stale >= config.patience {
            converged = true;
            break;
        }
    }

    Ok(FitOutcome {
        annotator: Annotator::new(Policy::Mlp { net }, data.normalizer)?,
        curve,
        converged,
    })
}
