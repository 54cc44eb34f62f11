//! Reinforcement-learning annotation of physiological monitor alarms.
//!
//! The crate turns timestamped vitals and expert annotations into labelled
//! datasets, rebalances them around alarm events, and trains DQN and A2C
//! agents that decide, one vitals sample at a time, whether the sample is an
//! alarm. Supervised baselines (an MLP and a linear max-margin classifier)
//! and the usual binary-classification metrics complete the comparison.
//!
//! The pipeline, in order:
//!
//! - [`ingest`]: parse line-delimited JSON streams, merge by timestamp, build
//!   the DS1/DS2 datasets.
//! - [`sampling`]: n-k / mixed downsampling and episode segmentation.
//! - [`synthgen`]: threshold-consistent synthetic streams for desk-scale runs.
//! - [`env`](mod@env): the annotation MDP and its two reward schemes.
//! - [`nn`]: dense networks with manual backpropagation, Adam and RMSProp.
//! - [`agents`]: DQN with experience replay, A2C, ε-greedy annealing, training.
//! - [`baselines`]: MLP and linear hinge-loss classifiers.
//! - [`eval`]: confusion counts, AUC, MCC, weighted F1, top-k reporting.
//! - [`model`] and [`checkpoint`]: trained annotators and run directories.
//! - [`cli`]: the `annotator` command line.
//!
//! ## Examples
//!
//! Each capability has a runnable example under `examples/`:
//!
//! ```text
//! synth_and_preprocess   generate streams, parse them, build DS1/DS2
//! downsampling           n-k and mixed rebalancing, episode segmentation
//! reward_shapes          both reward schemes and one environment episode
//! train_dqn              DQN training with held-out evaluation
//! train_a2c              A2C training with held-out evaluation
//! baselines              MLP and linear classifiers under class weighting
//! optimizer_comparison   Adam against RMSProp across seeds
//! benchmark_table        top-k snapshots merged into one comparison table
//! run_directory          save a run, reload its latest checkpoint
//! ```
//!
//! ```bash
//! cargo run --release --example train_a2c -- 50
//! ```

pub mod agents;
pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod env;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod sampling;
pub mod synthgen;

pub use error::{Error, Result};
