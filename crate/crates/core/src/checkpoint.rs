//! Run directories and checkpoints on disk.
//!
//! ```text
//! <run>/
//!   curve.csv                 epoch,avg_reward (agents) or epoch,loss (baselines)
//!   reports.json, reports.csv held-out metrics per checkpoint, if a test split was given
//!   checkpoints/epoch_000100/
//!     manifest.json
//!     q.json | actor.json + critic.json | mlp.json | linear.json
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place, and
//! a run is staged in a temporary directory that is renamed to its final
//! name only once complete.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::RngState;
use crate::env::Normalizer;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::model::{Annotator, ModelKind, Policy};
use crate::nn::DenseNet;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const REPORTS_JSON: &str = "reports.json";
pub const REPORTS_CSV: &str = "reports.csv";
pub const CHECKPOINTS_DIR: &str = "checkpoints";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub agent: ModelKind,
    pub epoch: usize,
    /// Exploration rate at the checkpoint; absent for baselines.
    pub epsilon: Option<f64>,
    pub steps: Option<u64>,
    pub rng_state: Option<RngState>,
    /// SHA-256 of the canonical JSON of the training configuration.
    pub config_hash: String,
    pub seed: u64,
    pub normalizer: Normalizer,
    pub downsample: String,
    pub reward: Option<String>,
}

/// Hex SHA-256 of `value` serialized with sorted keys and no whitespace.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps object keys sorted, which makes the bytes canonical.
    let canonical = serde_json::to_vec(&serde_json::to_value(value)?)?;
    Ok(hex::encode(Sha256::digest(&canonical)))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let wrap = |e: std::io::Error| Error::from(e).in_file(path);
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(wrap)?;
    tmp.write_all(bytes).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))
}

pub fn checkpoint_dir_name(epoch: usize) -> String {
    format!("epoch_{epoch:06}")
}

/// Writes one checkpoint directory (created if needed).
pub fn write_checkpoint(dir: &Path, manifest: &Manifest, annotator: &Annotator) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    write_json(&dir.join(MANIFEST_FILE), manifest)?;
    match annotator.policy() {
        Policy::Dqn { q } => write_json(&dir.join("q.json"), q),
        Policy::A2c { actor, critic } => {
            write_json(&dir.join("actor.json"), actor)?;
            write_json(&dir.join("critic.json"), critic)
        }
        Policy::Mlp { net } => write_json(&dir.join("mlp.json"), net),
        Policy::Svm { linear } => write_json(&dir.join("linear.json"), linear),
    }
}

/// Loads a checkpoint directory written by [`write_checkpoint`].
pub fn read_checkpoint(dir: &Path) -> Result<(Manifest, Annotator)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingCheckpoint(dir.to_path_buf()));
    }
    let manifest: Manifest = read_json(&manifest_path)?;
    let net = |name: &str| -> Result<DenseNet> {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(Error::MissingCheckpoint(path));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::from(e).in_file(&path))?;
        DenseNet::from_json(&text).map_err(|e| e.in_file(&path))
    };
    let policy = match manifest.agent {
        ModelKind::Dqn => Policy::Dqn { q: net("q.json")? },
        ModelKind::A2c => Policy::A2c {
            actor: net("actor.json")?,
            critic: net("critic.json")?,
        },
        ModelKind::Mlp => Policy::Mlp { net: net("mlp.json")? },
        ModelKind::Svm => {
            let path = dir.join("linear.json");
            if !path.is_file() {
                return Err(Error::MissingCheckpoint(path));
            }
            Policy::Svm {
                linear: read_json(&path)?,
            }
        }
    };
    let annotator = Annotator::new(policy, manifest.normalizer).map_err(|e| e.in_file(dir))?;
    Ok((manifest, annotator))
}

/// Checkpoint directories of a run, oldest first.
pub fn list_checkpoints(run: &Path) -> Result<Vec<PathBuf>> {
    let root = run.join(CHECKPOINTS_DIR);
    if !root.is_dir() {
        return Err(Error::MissingCheckpoint(root));
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(&root).map_err(|e| Error::from(e).in_file(&root))? {
        let path = entry.map_err(|e| Error::from(e).in_file(&root))?.path();
        if path.join(MANIFEST_FILE).is_file() {
            dirs.push(path);
        }
    }
    // zero-padded names sort by epoch
    dirs.sort();
    Ok(dirs)
}

/// Accepts either a checkpoint directory or a run directory (latest checkpoint).
pub fn resolve_checkpoint(path: &Path) -> Result<PathBuf> {
    if path.join(MANIFEST_FILE).is_file() {
        return Ok(path.to_path_buf());
    }
    if !path.exists() {
        return Err(Error::MissingCheckpoint(path.to_path_buf()));
    }
    list_checkpoints(path)?
        .pop()
        .ok_or_else(|| Error::MissingCheckpoint(path.to_path_buf()))
}

pub fn write_reports(dir: &Path, reports: &[EvalReport]) -> Result<()> {
    write_json(&dir.join(REPORTS_JSON), &reports)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record([
        "epoch",
        "tp",
        "fp",
        "fn",
        "tn",
        "sensitivity",
        "specificity",
        "auc",
        "mcc",
        "weighted_f1",
    ])?;
    for r in reports {
        let c = r.confusion;
        out.write_record([
            r.epoch.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            r.sensitivity.to_string(),
            r.specificity.to_string(),
            r.auc.to_string(),
            r.mcc.to_string(),
            r.weighted_f1.to_string(),
        ])?;
    }
    let bytes = out.into_inner().map_err(|e| Error::from(e.into_error()))?;
    write_atomic(&dir.join(REPORTS_CSV), &bytes)
}

/// `epoch,<value_name>` rows.
pub fn write_curve(path: &Path, value_name: &str, points: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["epoch", value_name])?;
    for (epoch, value) in points {
        out.write_record([epoch.to_string(), value.to_string()])?;
    }
    let bytes = out.into_inner().map_err(|e| Error::from(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// One checkpoint to be written as part of a run.
pub struct CheckpointRecord<'a> {
    pub manifest: Manifest,
    pub annotator: &'a Annotator,
}

/// Everything a training command leaves behind.
pub struct RunRecord<'a> {
    pub curve_header: &'static str,
    pub curve: Vec<(usize, f64)>,
    pub checkpoints: Vec<CheckpointRecord<'a>>,
    pub reports: Vec<EvalReport>,
}

/// Stages the run beside `out` and renames it into place.
///
/// Refuses to replace a non-empty directory.
pub fn save_run(out: &Path, record: &RunRecord<'_>) -> Result<()> {
    if out.is_dir()
        && fs::read_dir(out)
            .map_err(|e| Error::from(e).in_file(out))?
            .next()
            .is_some()
    {
        return Err(Error::config(
            "out",
            format!("{} exists and is not empty", out.display()),
        ));
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::from(e).in_file(&parent))?;
    let staging = tempfile::Builder::new()
        .prefix(".run-")
        .tempdir_in(&parent)
        .map_err(|e| Error::from(e).in_file(&parent))?;
    let root = staging.path();

    write_curve(
        &root.join(CURVE_FILE),
        record.curve_header,
        record.curve.iter().copied(),
    )?;
    if !record.reports.is_empty() {
        write_reports(root, &record.reports)?;
    }
    for c in &record.checkpoints {
        let dir = root.join(CHECKPOINTS_DIR).join(checkpoint_dir_name(c.manifest.epoch));
        write_checkpoint(&dir, &c.manifest, c.annotator)?;
    }

    if out.is_dir() {
        fs::remove_dir(out).map_err(|e| Error::from(e).in_file(out))?;
    }
    let staged = staging.keep();
    fs::rename(&staged, out).map_err(|e| Error::from(e).in_file(out))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::LinearClassifier;
    use crate::nn::{Activation, Layer};

    fn annotator() -> Annotator {
        let net = DenseNet::new(vec![Layer {
            inputs: 6,
            outputs: 2,
            activation: Activation::Linear,
            weights: (0..12).map(|i| i as f64 / 7.0).collect(),
            bias: vec![0.1, -0.3],
        }])
        .unwrap();
        Annotator::new(Policy::Dqn { q: net }, Normalizer::identity()).unwrap()
    }

    fn manifest(agent: ModelKind, epoch: usize) -> Manifest {
        Manifest {
            agent,
            epoch,
            epsilon: Some(0.5),
            steps: Some(10),
            rng_state: None,
            config_hash: config_hash(&("cfg", 1)).unwrap(),
            seed: 3,
            normalizer: Normalizer::identity(),
            downsample: "n3".into(),
            reward: Some("simple".into()),
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = annotator();
        write_checkpoint(dir.path(), &manifest(ModelKind::Dqn, 5), &a).unwrap();
        let (m, back) = read_checkpoint(dir.path()).unwrap();
        assert_eq!(m, manifest(ModelKind::Dqn, 5));
        assert_eq!(back, a);
    }

    #[test]
    fn linear_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let linear = LinearClassifier {
            weights: [0.1, 0.2, 0.3, -0.4, 0.5, 1.0 / 3.0],
            bias: -0.7,
        };
        let a = Annotator::new(Policy::Svm { linear }, Normalizer::identity()).unwrap();
        let mut m = manifest(ModelKind::Svm, 1);
        m.epsilon = None;
        write_checkpoint(dir.path(), &m, &a).unwrap();
        assert_eq!(read_checkpoint(dir.path()).unwrap().1, a);
    }

    #[test]
    fn missing_checkpoint_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope");
        assert!(matches!(read_checkpoint(&missing), Err(Error::MissingCheckpoint(_))));
        assert!(matches!(resolve_checkpoint(&missing), Err(Error::MissingCheckpoint(_))));
    }

    #[test]
    fn config_hash_ignores_field_order() {
        let a = serde_json::json!({"b": 1, "a": [1, 2]});
        let b = serde_json::json!({"a": [1, 2], "b": 1});
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_ne!(
            config_hash(&a).unwrap(),
            config_hash(&serde_json::json!({"b": 2})).unwrap()
        );
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }

    #[test]
    fn run_layout_and_latest_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let a = annotator();
        let record = RunRecord {
            curve_header: "avg_reward",
            curve: vec![(1, 2.5), (2, 3.0)],
            checkpoints: vec![
                CheckpointRecord {
                    manifest: manifest(ModelKind::Dqn, 1),
                    annotator: &a,
                },
                CheckpointRecord {
                    manifest: manifest(ModelKind::Dqn, 2),
                    annotator: &a,
                },
            ],
            reports: vec![],
        };
        save_run(&out, &record).unwrap();
        let curve = fs::read_to_string(out.join(CURVE_FILE)).unwrap();
        assert_eq!(curve, "epoch,avg_reward\n1,2.5\n2,3\n");
        let latest = resolve_checkpoint(&out).unwrap();
        assert!(latest.ends_with("checkpoints/epoch_000002"));
        // nothing left behind in the parent but the run itself
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, ["run"]);
        assert!(save_run(&out, &record).is_err());
    }
}
