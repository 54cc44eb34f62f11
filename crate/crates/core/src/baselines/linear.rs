//! Linear max-margin classifier (soft-margin SVM in the primal).
//!
//! Minimises `λ/2 ‖w‖² + (1/N) Σ c_i · max(0, 1 − y_i (w·x_i + b))` by
//! full-batch subgradient descent with step `η₀ / √t`, keeping the iterate
//! with the lowest objective. The bias is not regularized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{prepare, ClassWeighting, FitOutcome, LossPoint};
use crate::env::StateVector;
use crate::error::{Error, Result};
use crate::ingest::{Dataset, VITALS_DIM};
use crate::model::{Annotator, Policy};
use crate::sampling::SamplingStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: [f64; VITALS_DIM],
    pub bias: f64,
}

impl LinearClassifier {
    pub fn margin(&self, state: &StateVector) -> f64 {
        self.weights.iter().zip(state).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().chain([&self.bias]).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidNetwork("non-finite linear parameters".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    /// L2 penalty λ.
    pub lambda: f64,
    pub iterations: usize,
    /// Initial step size η₀.
    pub step: f64,
    pub normalize: bool,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            iterations: 2000,
            step: 0.1,
            normalize: true,
        }
    }
}

impl LinearConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::config("lambda", "must be positive"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::config("step", "must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        Ok(())
    }
}

fn sign(class: usize) -> f64 {
    if class == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Objective value and subgradient `(∂w, ∂b)` at `model`.
fn objective(
    model: &LinearClassifier,
    states: &[StateVector],
    classes: &[usize],
    weights: [f64; 2],
    lambda: f64,
) -> (f64, [f64; VITALS_DIM], f64) {
    let n = states.len() as f64;
    let mut loss = 0.0;
    let mut gw = [0.0; VITALS_DIM];
    let mut gb = 0.0;
    for (x, &c) in states.iter().zip(classes) {
        let y = sign(c);
        let slack = 1.0 - y * model.margin(x);
        if slack > 0.0 {
            let cw = weights[c];
            loss += cw * slack;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g -= cw * y * xi / n;
            }
            gb -= cw * y / n;
        }
    }
    let norm2: f64 = model.weights.iter().map(|w| w * w).sum();
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g += lambda * w;
    }
    (0.5 * lambda * norm2 + loss / n, gw, gb)
}

/// Fits on the split downsampled with `strategy` (all rows for `None`);
/// both classes must be present.
pub fn linear_train(
    train: &Dataset,
    strategy: impl Into<Option<SamplingStrategy>>,
    weighting: ClassWeighting,
    seed: u64,
    config: &LinearConfig,
) -> Result<FitOutcome> {
    config.validate()?;
    let data = prepare(train, strategy.into(), weighting, config.normalize)?;
    let alarms = data.classes.iter().filter(|&&c| c == 1).count();
    if alarms == 0 || alarms == data.classes.len() {
        return Err(Error::DegenerateData(
            "the linear classifier needs both classes in the training rows".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = LinearClassifier {
        weights: std::array::from_fn(|_| rng.random_range(-0.01..0.01)),
        bias: 0.0,
    };
    let mut best = (f64::INFINITY, model);
    let mut curve = Vec::with_capacity(config.iterations);
    for t in 1..=config.iterations {
        let (loss, gw, gb) = objective(&model, &data.states, &data.classes, data.weights, config.lambda);
        curve.push(LossPoint { epoch: t, loss });
        if loss < best.0 {
            best = (loss, model);
        }
        let eta = config.step / (t as f64).sqrt();
        for (w, g) in model.weights.iter_mut().zip(gw) {
            *w -= eta * g;
        }
        model.bias -= eta * gb;
    }
    let (final_loss, ..) = objective(&model, &data.states, &data.classes, data.weights, config.lambda);
    if final_loss < best.0 {
        best = (final_loss, model);
    }

    Ok(FitOutcome {
        annotator: Annotator::new(Policy::Svm { linear: best.1 }, data.normalizer)?,
        curve,
        converged: false,
    })
}
