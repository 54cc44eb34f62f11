//! Trained models as scorers over raw vitals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::q_score;
use crate::baselines::LinearClassifier;
use crate::env::{Action, Normalizer, StateVector};
use crate::error::{Error, Result};
use crate::eval::AlarmModel;
use crate::ingest::{VitalsSample, VITALS_DIM};
use crate::nn::{Activation, DenseNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dqn,
    A2c,
    Mlp,
    Svm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dqn => "dqn",
            ModelKind::A2c => "a2c",
            ModelKind::Mlp => "mlp",
            ModelKind::Svm => "svm",
        }
    }

    pub fn is_agent(self) -> bool {
        matches!(self, ModelKind::Dqn | ModelKind::A2c)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dqn" => Ok(ModelKind::Dqn),
            "a2c" => Ok(ModelKind::A2c),
            "mlp" => Ok(ModelKind::Mlp),
            "svm" | "linear" => Ok(ModelKind::Svm),
            other => Err(format!("unknown model `{other}` (expected dqn|a2c|mlp|svm)")),
        }
    }
}

/// The learned parameters of any model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Policy {
    /// Q-network with two linear outputs.
    Dqn {
        q: DenseNet,
    },
    /// Softmax actor; the critic is kept for resumption and inspection.
    A2c {
        actor: DenseNet,
        critic: DenseNet,
    },
    /// Softmax classifier.
    Mlp {
        net: DenseNet,
    },
    Svm {
        linear: LinearClassifier,
    },
}

impl Policy {
    pub fn kind(&self) -> ModelKind {
        match self {
            Policy::Dqn { .. } => ModelKind::Dqn,
            Policy::A2c { .. } => ModelKind::A2c,
            Policy::Mlp { .. } => ModelKind::Mlp,
            Policy::Svm { .. } => ModelKind::Svm,
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |net: &DenseNet, outputs: usize, head: Option<Activation>| -> Result<()> {
            net.validate()?;
            if net.input_dim() != VITALS_DIM || net.output_dim() != outputs {
                return Err(Error::InvalidNetwork(format!(
                    "expected {VITALS_DIM} -> {outputs}, got {} -> {}",
                    net.input_dim(),
                    net.output_dim()
                )));
            }
            if let Some(head) = head {
                let last = net.layers().last().map(|l| l.activation);
                if last != Some(head) {
                    return Err(Error::InvalidNetwork(format!("output layer must be {head:?}")));
                }
            }
            Ok(())
        };
        match self {
            Policy::Dqn { q } => check(q, 2, None),
            Policy::A2c { actor, critic } => {
                check(actor, 2, Some(Activation::Softmax))?;
                check(critic, 1, None)
            }
            Policy::Mlp { net } => check(net, 2, Some(Activation::Softmax)),
            Policy::Svm { linear } => linear.validate(),
        }
    }
}

/// A policy together with the state normalization it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotator {
    policy: Policy,
    normalizer: Normalizer,
}

impl Annotator {
    pub fn new(policy: Policy, normalizer: Normalizer) -> Result<Self> {
        policy.validate()?;
        Ok(Self { policy, normalizer })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn kind(&self) -> ModelKind {
        self.policy.kind()
    }

    pub fn state(&self, vitals: &VitalsSample) -> StateVector {
        self.normalizer.transform(vitals)
    }

    /// Per-action preferences on a normalized state: Q-values, action
    /// probabilities, class probabilities, or `(-margin, margin)`.
    pub fn preferences(&self, state: &StateVector) -> [f64; 2] {
        let forward = |net: &DenseNet| {
            let out = net.forward(state).expect("input dimension checked at construction");
            [out[0], out[1]]
        };
        match &self.policy {
            Policy::Dqn { q } => forward(q),
            Policy::A2c { actor, .. } => forward(actor),
            Policy::Mlp { net } => forward(net),
            Policy::Svm { linear } => {
                let m = linear.margin(state);
                [-m, m]
            }
        }
    }
}

impl AlarmModel for Annotator {
    /// Alarm probability for the network models, signed margin for the SVM.
    fn score(&self, vitals: &VitalsSample) -> f64 {
        let prefs = self.preferences(&self.state(vitals));
        match self.policy {
            Policy::Dqn { .. } => q_score(prefs),
            _ => prefs[1],
        }
    }

    fn predict(&self, vitals: &VitalsSample) -> Action {
        Action::argmax(self.preferences(&self.state(vitals)))
    }
}
