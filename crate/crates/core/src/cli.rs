//! The `annotator` command line.
//!
//! Subcommands: `synth`, `preprocess`, `train`, `eval`, `benchmark`. Logging
//! is controlled by `ANNOTATOR_LOG` (`error`, `info`, `debug`, ...).

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use serde::{Deserialize, Serialize};

use crate::agents::{train, AgentKind, TrainConfig, TrainSetup};
use crate::baselines::{linear_train, mlp_train, ClassWeighting, FitOutcome, LinearConfig, MlpConfig};
use crate::checkpoint::{
    config_hash, list_checkpoints, read_checkpoint, resolve_checkpoint, save_run, write_atomic, CheckpointRecord,
    Manifest, RunRecord,
};
use crate::env::{ActionMode, RewardScheme, VitalThresholds};
use crate::error::{Error, Result};
use crate::eval::{evaluate, sort_rows, top_k_reports, write_table_csv, EvalReport, TableRow};
use crate::ingest::{
    build_ds2, merge_by_timestamp, parse_records, read_dataset_csv, write_dataset_csv, Dataset, Split,
    DEFAULT_MATCH_TOLERANCE_MS,
};
use crate::model::ModelKind;
use crate::nn::OptimizerKind;
use crate::sampling::SamplingStrategy;
use crate::synthgen::{generate, SynthConfig};

pub const VITALS_FILE: &str = "vitals.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";

#[derive(Debug, Parser)]
#[command(
    name = "annotator",
    version,
    about = "Reinforcement-learning annotation of monitor alarms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic vitals and annotation streams.
    Synth(SynthArgs),
    /// Merge streams into a DS1 or DS2 dataset CSV.
    Preprocess(PreprocessArgs),
    /// Train an agent or baseline and write a run directory.
    Train(TrainArgs),
    /// Evaluate one checkpoint on a test dataset.
    Eval(EvalArgs),
    /// Merge the top-k checkpoints of several runs into one table.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON generator config.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Print the counts without writing files.
    #[arg(long)]
    pub dry_run: bool,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with hr/sbp/dbp bands.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub vitals: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Optional raw alarm stream; parsed and validated, not merged.
    #[arg(long)]
    pub alarms: Option<PathBuf>,
    #[arg(long, value_parser = ["1", "2"], default_value = "2")]
    pub ds: String,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MATCH_TOLERANCE_MS)]
    pub tolerance_ms: i64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset CSV.
    pub dataset: PathBuf,
    /// Run directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file whose keys mirror these flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// dqn | a2c | mlp | svm
    #[arg(long)]
    pub agent: Option<ModelKind>,
    /// n0 | n1 | n3 | n5 | n10 | mixed
    #[arg(long)]
    pub downsample: Option<SamplingStrategy>,
    /// simple | vitals
    #[arg(long)]
    pub reward: Option<String>,
    /// adam | rmsprop
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Test dataset CSV; evaluated at every checkpoint.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Feed raw vitals instead of z-scores.
    #[arg(long)]
    pub no_normalize: bool,
    /// JSON file with hr/sbp/dbp bands for the vitals reward.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Baselines only: `balanced`, `unit`, or `A:N` such as `20:1`.
    #[arg(long)]
    pub class_weight: Option<ClassWeighting>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint directory, or a run directory (latest checkpoint).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Test dataset CSV.
    pub dataset: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// JSON list of run directories (strings or {path, agent, range}).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Test dataset CSV.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

/// Parses the process arguments, runs, and maps errors to a nonzero exit.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ANNOTATOR_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Preprocess(a) => cmd_preprocess(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::from(e).in_file(path))
}

fn load_thresholds(path: Option<&Path>) -> Result<Option<VitalThresholds>> {
    path.map(|p| VitalThresholds::from_json(&read_text(p)?).map_err(|e| e.in_file(p)))
        .transpose()
}

pub fn load_dataset(path: &Path, split: Split) -> Result<Dataset> {
    read_dataset_csv(open(path)?, split).map_err(|e| e.in_file(path))
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut config = SynthConfig::from_json(&read_text(&args.config)?).map_err(|e| e.in_file(&args.config))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let thresholds = load_thresholds(args.thresholds.as_deref())?.unwrap_or_default();
    let data = generate(&config, &thresholds)?;
    for (severity, count) in data.severity_counts() {
        println!("{:<14}{count}", severity.as_str());
    }
    let alarms = data.events.iter().filter(|e| e.severity.label().is_alarm()).count();
    println!("{:<14}{alarms}", "alarms");
    println!("{:<14}{}", "non_alarms", data.events.len() - alarms);
    if args.dry_run {
        return Ok(());
    }
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::from(e).in_file(&args.out_dir))?;
    let (vitals, annotations) = data.to_streams();
    write_atomic(&args.out_dir.join(VITALS_FILE), vitals.as_bytes())?;
    write_atomic(&args.out_dir.join(ANNOTATIONS_FILE), annotations.as_bytes())?;
    info!("wrote {} events to {}", data.events.len(), args.out_dir.display());
    Ok(())
}

fn cmd_preprocess(args: &PreprocessArgs) -> Result<()> {
    let empty = || BufReader::new(std::io::empty());
    let streams = match &args.alarms {
        Some(alarms) => parse_records(open(&args.vitals)?, open(alarms)?, open(&args.annotations)?),
        None => parse_records(open(&args.vitals)?, empty(), open(&args.annotations)?),
    }?;
    let ds1 = merge_by_timestamp(&streams.vitals, &streams.annotations, args.split, args.tolerance_ms)?;
    let dataset = if args.ds == "2" { build_ds2(&ds1) } else { ds1 };

    let mut bytes = Vec::new();
    write_dataset_csv(&dataset, &mut bytes)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::from(e).in_file(parent))?;
    }
    write_atomic(&args.out, &bytes)?;

    let counts = dataset.class_counts();
    let split = match args.split {
        Split::Train => "train",
        Split::Test => "test",
    };
    println!("DS{:<8}{:>8}{:>12}{:>8}", args.ds, "True", "Non-Alarms", "Total");
    println!(
        "{split:<10}{:>8}{:>12}{:>8}",
        counts.alarms,
        counts.non_alarms,
        counts.total()
    );
    Ok(())
}

/// Flat training config file; every key mirrors a flag or a hyperparameter.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub agent: Option<String>,
    pub downsample: Option<String>,
    pub reward: Option<String>,
    pub optimizer: Option<String>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub eval_every: Option<usize>,
    pub test: Option<PathBuf>,
    pub normalize: Option<bool>,
    pub thresholds: Option<VitalThresholds>,
    pub action_mode: Option<ActionMode>,
    pub class_weight: Option<String>,
    pub gamma: Option<f64>,
    pub batch_size: Option<usize>,
    pub update_interval: Option<usize>,
    pub lr_q: Option<f64>,
    pub lr_actor: Option<f64>,
    pub lr_critic: Option<f64>,
    pub replay_capacity: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub horizon: Option<usize>,
    pub shuffle_episodes: Option<bool>,
    pub epsilon_floor: Option<f64>,
    pub epsilon_decay: Option<f64>,
}

/// Fully resolved training parameters; hashed into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainPlan {
    pub agent: ModelKind,
    pub downsample: SamplingStrategy,
    pub reward: RewardScheme,
    pub seed: u64,
    pub test: Option<PathBuf>,
    pub agent_config: TrainConfig,
    pub class_weight: ClassWeighting,
    pub mlp: MlpConfig,
    pub linear: LinearConfig,
}

fn parse_field<T: std::str::FromStr<Err = String>>(field: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e: String| Error::config(field, e))
}

impl TrainPlan {
    /// File values first, then flags on top, then defaults.
    pub fn resolve(args: &TrainArgs, file: &TrainFile) -> Result<Self> {
        let agent = match (args.agent, &file.agent) {
            (Some(a), _) => a,
            (None, Some(s)) => parse_field("agent", s)?,
            (None, None) => ModelKind::A2c,
        };
        let seed = args.seed.or(file.seed).unwrap_or(0);
        let downsample = match (args.downsample, &file.downsample) {
            (Some(d), _) => d,
            (None, Some(s)) => parse_field("downsample", s)?,
            (None, None) => SamplingStrategy::Mixed { seed: 0 },
        }
        .with_seed(seed);
        let thresholds = match load_thresholds(args.thresholds.as_deref())? {
            Some(t) => t,
            None => file.thresholds.unwrap_or_default(),
        };
        thresholds.validate()?;
        let reward_name = args.reward.as_deref().or(file.reward.as_deref()).unwrap_or("simple");
        let reward = match parse_field::<RewardScheme>("reward", reward_name)? {
            RewardScheme::SimpleMatch => RewardScheme::SimpleMatch,
            RewardScheme::VitalsSigmoid { .. } => RewardScheme::VitalsSigmoid {
                thresholds,
                action_mode: file.action_mode.unwrap_or(ActionMode::Mirror),
            },
        };
        let optimizer = match (args.optimizer, &file.optimizer) {
            (Some(o), _) => o,
            (None, Some(s)) => parse_field("optimizer", s)?,
            (None, None) => OptimizerKind::Adam,
        };
        let normalize = !args.no_normalize && file.normalize.unwrap_or(true);
        let epochs = args.epochs.or(file.epochs);

        let d = TrainConfig::default();
        let agent_config = TrainConfig {
            gamma: file.gamma.unwrap_or(d.gamma),
            batch_size: file.batch_size.unwrap_or(d.batch_size),
            update_interval: file.update_interval.unwrap_or(d.update_interval),
            lr_q: file.lr_q.unwrap_or(d.lr_q),
            lr_actor: file.lr_actor.unwrap_or(d.lr_actor),
            lr_critic: file.lr_critic.unwrap_or(d.lr_critic),
            optimizer,
            epochs: epochs.unwrap_or(d.epochs),
            eval_every: args.eval_every.or(file.eval_every).unwrap_or(d.eval_every),
            replay_capacity: file.replay_capacity.unwrap_or(d.replay_capacity),
            hidden: file.hidden.clone().unwrap_or(d.hidden),
            horizon: file.horizon.unwrap_or(d.horizon),
            shuffle_episodes: file.shuffle_episodes.unwrap_or(d.shuffle_episodes),
            exploration: crate::agents::ExplorationConfig {
                floor: file.epsilon_floor.unwrap_or(d.exploration.floor),
                decay: file.epsilon_decay.unwrap_or(d.exploration.decay),
                ..d.exploration
            },
            normalize,
        };
        agent_config.validate()?;

        let class_weight = match (args.class_weight, &file.class_weight) {
            (Some(w), _) => w,
            (None, Some(s)) => parse_field("class_weight", s)?,
            (None, None) => ClassWeighting::default_for(downsample),
        };
        let md = MlpConfig::default();
        let mlp = MlpConfig {
            optimizer,
            max_epochs: epochs.unwrap_or(md.max_epochs),
            normalize,
            ..md
        };
        let ld = LinearConfig::default();
        let linear = LinearConfig {
            iterations: epochs.unwrap_or(ld.iterations),
            normalize,
            ..ld
        };
        if !agent.is_agent() && epochs == Some(0) {
            return Err(Error::config("epochs", "baselines need at least one epoch"));
        }

        Ok(Self {
            agent,
            downsample,
            reward,
            seed,
            test: args.test.clone().or_else(|| file.test.clone()),
            agent_config,
            class_weight,
            mlp,
            linear,
        })
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Error::from(e).in_file(p))?,
        None => TrainFile::default(),
    };
    let plan = TrainPlan::resolve(args, &file)?;
    let dataset = load_dataset(&args.dataset, Split::Train)?;
    let test = plan.test.as_deref().map(|p| load_dataset(p, Split::Test)).transpose()?;
    let hash = config_hash(&plan)?;
    info!(
        "training {} on {} rows ({})",
        plan.agent,
        dataset.len(),
        plan.downsample
    );

    let manifest = |epoch, annotator: &crate::model::Annotator| Manifest {
        agent: plan.agent,
        epoch,
        epsilon: None,
        steps: None,
        rng_state: None,
        config_hash: hash.clone(),
        seed: plan.seed,
        normalizer: *annotator.normalizer(),
        downsample: plan.downsample.flag(),
        reward: plan.agent.is_agent().then(|| plan.reward.flag().to_string()),
    };

    match plan.agent {
        ModelKind::Dqn | ModelKind::A2c => {
            let kind = if plan.agent == ModelKind::Dqn {
                AgentKind::Dqn
            } else {
                AgentKind::A2c
            };
            let outcome = train(TrainSetup {
                agent: kind,
                train: &dataset,
                strategy: plan.downsample,
                reward: plan.reward,
                config: &plan.agent_config,
                seed: plan.seed,
                test: test.as_ref(),
            })?;
            let mut checkpoints: Vec<CheckpointRecord<'_>> = outcome
                .snapshots
                .iter()
                .map(|s| CheckpointRecord {
                    manifest: Manifest {
                        epsilon: Some(s.epsilon),
                        steps: Some(s.steps),
                        rng_state: Some(s.rng_state.clone()),
                        ..manifest(s.epoch, &s.annotator)
                    },
                    annotator: &s.annotator,
                })
                .collect();
            if checkpoints.is_empty() {
                checkpoints.push(CheckpointRecord {
                    manifest: manifest(0, &outcome.annotator),
                    annotator: &outcome.annotator,
                });
            }
            let reports: Vec<EvalReport> = outcome.snapshots.iter().filter_map(|s| s.report).collect();
            for r in &reports {
                info!(
                    "epoch {}: auc {:.3} sens {:.3} spec {:.3}",
                    r.epoch, r.auc, r.sensitivity, r.specificity
                );
            }
            save_run(
                &args.out,
                &RunRecord {
                    curve_header: "avg_reward",
                    curve: outcome.curve.iter().map(|p| (p.epoch, p.avg_reward)).collect(),
                    checkpoints,
                    reports,
                },
            )?;
            println!(
                "{} epochs, {} steps -> {}",
                outcome.curve.len(),
                outcome.steps,
                args.out.display()
            );
        }
        ModelKind::Mlp | ModelKind::Svm => {
            let fit: FitOutcome = if plan.agent == ModelKind::Mlp {
                mlp_train(&dataset, plan.downsample, plan.class_weight, plan.seed, &plan.mlp)?
            } else {
                linear_train(&dataset, plan.downsample, plan.class_weight, plan.seed, &plan.linear)?
            };
            let epoch = fit.curve.len();
            let reports = test
                .as_ref()
                .map(|t| evaluate(&fit.annotator, t, epoch))
                .transpose()?
                .into_iter()
                .collect();
            save_run(
                &args.out,
                &RunRecord {
                    curve_header: "loss",
                    curve: fit.curve.iter().map(|p| (p.epoch, p.loss)).collect(),
                    checkpoints: vec![CheckpointRecord {
                        manifest: manifest(epoch, &fit.annotator),
                        annotator: &fit.annotator,
                    }],
                    reports,
                },
            )?;
            println!("{epoch} epochs -> {}", args.out.display());
        }
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let dir = resolve_checkpoint(&args.checkpoint)?;
    let (manifest, annotator) = read_checkpoint(&dir)?;
    let test = load_dataset(&args.dataset, Split::Test)?;
    let report = evaluate(&annotator, &test, manifest.epoch)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(out) = &args.out {
        write_atomic(out, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RunEntry {
    Path(PathBuf),
    Labeled {
        path: PathBuf,
        agent: Option<String>,
        range: Option<String>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum BenchmarkManifest {
    List(Vec<RunEntry>),
    Object { runs: Vec<RunEntry> },
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkEntry {
    pub run: PathBuf,
    pub agent: String,
    pub range: String,
    pub short: bool,
    pub reports: Vec<EvalReport>,
}

fn range_label(flag: &str) -> String {
    flag.parse::<SamplingStrategy>()
        .map(|s| s.range_label())
        .unwrap_or_else(|_| flag.to_string())
}

/// Evaluates every checkpoint of one run and keeps the top `k`.
fn benchmark_run(entry: &RunEntry, base: &Path, test: &Dataset, k: usize) -> Result<BenchmarkEntry> {
    let (path, agent, range) = match entry {
        RunEntry::Path(p) => (p, None, None),
        RunEntry::Labeled { path, agent, range } => (path, agent.clone(), range.clone()),
    };
    let run = base.join(path);
    let mut reports = Vec::new();
    let mut meta = None;
    for dir in list_checkpoints(&run)? {
        let (manifest, annotator) = read_checkpoint(&dir)?;
        reports.push(evaluate(&annotator, test, manifest.epoch)?);
        meta = Some(manifest);
    }
    let meta = meta.ok_or_else(|| Error::MissingCheckpoint(run.clone()))?;
    let top = top_k_reports(&reports, k)?;
    if top.short {
        info!("{}: only {} checkpoints for k = {k}", run.display(), reports.len());
    }
    Ok(BenchmarkEntry {
        agent: agent.unwrap_or_else(|| meta.agent.as_str().to_uppercase()),
        range: range.unwrap_or_else(|| range_label(&meta.downsample)),
        run,
        short: top.short,
        reports: top.reports,
    })
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    let text = read_text(&args.manifest)?;
    let runs = match serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(&args.manifest))? {
        BenchmarkManifest::List(r) | BenchmarkManifest::Object { runs: r } => r,
    };
    let base = args.manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    // every run must exist before any evaluation starts
    for entry in &runs {
        let path = match entry {
            RunEntry::Path(p) | RunEntry::Labeled { path: p, .. } => base.join(p),
        };
        if list_checkpoints(&path)?.is_empty() {
            return Err(Error::MissingCheckpoint(path));
        }
    }
    let test = load_dataset(&args.test, Split::Test)?;
    let results: Vec<Result<BenchmarkEntry>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|entry| scope.spawn(|| benchmark_run(entry, &base, &test, args.k)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("benchmark worker panicked"))
            .collect()
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<TableRow> = entries
        .iter()
        .flat_map(|e| e.reports.iter().map(|r| TableRow::new(&e.agent, &e.range, r)))
        .collect();
    sort_rows(&mut rows);
    let mut csv_bytes = Vec::new();
    write_table_csv(&rows, &mut csv_bytes)?;
    match &args.out_csv {
        Some(path) => write_atomic(path, &csv_bytes)?,
        None => std::io::stdout().write_all(&csv_bytes)?,
    }
    if let Some(path) = &args.out_json {
        let json = serde_json::to_string_pretty(&entries)? + "\n";
        write_atomic(path, json.as_bytes())?;
    }
    Ok(())
}
