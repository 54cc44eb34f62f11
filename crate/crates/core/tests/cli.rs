use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn annotator(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annotator"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("annotator binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = annotator(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const CONFIG: &str = r#"{"n_events": 300, "alarm_rate": 0.3, "label_noise": 0.0,
    "indeterminate_rate": 0.1, "seed": 4, "vitals_noise_sd": 1.0}"#;

/// Synthesizes and preprocesses one split, returning the CSV path.
fn dataset(dir: &Path, name: &str, seed: u64) -> PathBuf {
    synth_config(dir, "synth.json", CONFIG);
    let streams = dir.join(format!("{name}_streams"));
    ok(
        &[
            "synth",
            "--config",
            "synth.json",
            "--out-dir",
            streams.to_str().unwrap(),
            "--seed",
            &seed.to_string(),
        ],
        dir,
    );
    let csv = dir.join(format!("{name}.csv"));
    ok(
        &[
            "preprocess",
            "--vitals",
            streams.join("vitals.jsonl").to_str().unwrap(),
            "--annotations",
            streams.join("annotations.jsonl").to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
        ],
        dir,
    );
    csv
}

fn read_dir_sorted(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn synth_writes_two_streams() {
    let tmp = TempDir::new().unwrap();
    synth_config(tmp.path(), "c.json", CONFIG);
    ok(&["synth", "--config", "c.json", "--out-dir", "out"], tmp.path());
    assert!(tmp.path().join("out/vitals.jsonl").is_file());
    assert!(tmp.path().join("out/annotations.jsonl").is_file());
    let lines = fs::read_to_string(tmp.path().join("out/vitals.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 300);
}

#[test]
fn synth_dry_run_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    synth_config(tmp.path(), "c.json", CONFIG);
    let stdout = ok(
        &["synth", "--config", "c.json", "--out-dir", "out", "--dry-run"],
        tmp.path(),
    );
    assert!(stdout.contains("alarms"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn synth_missing_seed_names_the_field() {
    let tmp = TempDir::new().unwrap();
    synth_config(
        tmp.path(),
        "c.json",
        r#"{"n_events": 10, "alarm_rate": 0.3, "label_noise": 0.0, "indeterminate_rate": 0.0, "vitals_noise_sd": 1.0}"#,
    );
    let out = annotator(&["synth", "--config", "c.json"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn preprocess_is_repeatable_and_drops_indeterminate() {
    let tmp = TempDir::new().unwrap();
    let a = dataset(tmp.path(), "a", 1);
    let first = fs::read(&a).unwrap();
    fs::remove_file(&a).unwrap();
    let a = dataset(tmp.path(), "a", 1);
    assert_eq!(first, fs::read(&a).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(!text.contains("indeterminate"));
    assert!(text.lines().count() > 250);
}

#[test]
fn preprocess_ds1_keeps_every_event() {
    let tmp = TempDir::new().unwrap();
    synth_config(tmp.path(), "c.json", CONFIG);
    ok(&["synth", "--config", "c.json", "--out-dir", "s"], tmp.path());
    let stdout = ok(
        &[
            "preprocess",
            "--vitals",
            "s/vitals.jsonl",
            "--annotations",
            "s/annotations.jsonl",
            "--ds",
            "1",
            "--out",
            "ds1.csv",
        ],
        tmp.path(),
    );
    assert!(!stdout.is_empty());
    let text = fs::read_to_string(tmp.path().join("ds1.csv")).unwrap();
    assert_eq!(text.lines().count(), 301);
}

#[test]
fn preprocess_reports_bad_line() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("v.jsonl"), "{\"t\": 0, \"hr\": 80}\n").unwrap();
    fs::write(tmp.path().join("a.jsonl"), "").unwrap();
    let out = annotator(
        &[
            "preprocess",
            "--vitals",
            "v.jsonl",
            "--annotations",
            "a.jsonl",
            "--out",
            "o.csv",
        ],
        tmp.path(),
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1"), "{err}");
    assert!(!tmp.path().join("o.csv").exists());
}

#[test]
fn train_a2c_writes_one_curve_row_per_epoch_and_repeats() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "train", 2);
    let data = data.to_str().unwrap();
    let args = |out: &'static str| {
        vec![
            "train", data, "--agent", "a2c", "--epochs", "200", "--seed", "7", "--out", out,
        ]
    };
    ok(&args("run1"), tmp.path());
    ok(&args("run2"), tmp.path());
    let curve = fs::read_to_string(tmp.path().join("run1/curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("epoch,avg_reward"));
    assert_eq!(lines.count(), 200);
    assert_eq!(
        read_dir_sorted(&tmp.path().join("run1")),
        read_dir_sorted(&tmp.path().join("run2"))
    );
}

#[test]
fn train_rejects_unknown_values() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "train", 2);
    for (flag, value) in [
        ("--agent", "ppo"),
        ("--optimizer", "sgd"),
        ("--downsample", "n7"),
        ("--reward", "dense"),
    ] {
        let out = annotator(
            &["train", data.to_str().unwrap(), "--out", "r", flag, value],
            tmp.path(),
        );
        assert!(!out.status.success(), "{flag} {value} accepted");
    }
    assert!(!tmp.path().join("r").exists());
}

#[test]
fn optimizer_arms_both_train() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "train", 3);
    for opt in ["adam", "rmsprop"] {
        let out = format!("run_{opt}");
        ok(
            &[
                "train",
                data.to_str().unwrap(),
                "--agent",
                "dqn",
                "--optimizer",
                opt,
                "--epochs",
                "3",
                "--out",
                &out,
            ],
            tmp.path(),
        );
        let curve = fs::read_to_string(tmp.path().join(&out).join("curve.csv")).unwrap();
        assert_eq!(curve.lines().count(), 4);
    }
}

#[test]
fn eval_prints_a_report_for_each_model_kind() {
    let tmp = TempDir::new().unwrap();
    let train = dataset(tmp.path(), "train", 5);
    let test = dataset(tmp.path(), "test", 6);
    for agent in ["dqn", "a2c", "mlp", "svm"] {
        let out = format!("run_{agent}");
        ok(
            &[
                "train",
                train.to_str().unwrap(),
                "--agent",
                agent,
                "--epochs",
                "4",
                "--downsample",
                "n3",
                "--out",
                &out,
            ],
            tmp.path(),
        );
        let stdout = ok(&["eval", "--checkpoint", &out, test.to_str().unwrap()], tmp.path());
        let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
        assert!(report["auc"].as_f64().is_some(), "{agent}: {stdout}");
    }
}

#[test]
fn eval_missing_checkpoint_fails() {
    let tmp = TempDir::new().unwrap();
    let test = dataset(tmp.path(), "test", 6);
    let out = annotator(&["eval", "--checkpoint", "nowhere", test.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}

fn train_run(dir: &Path, data: &Path, agent: &str, downsample: &str, out: &str) {
    ok(
        &[
            "train",
            data.to_str().unwrap(),
            "--agent",
            agent,
            "--downsample",
            downsample,
            "--epochs",
            "4",
            "--eval-every",
            "2",
            "--test",
            data.to_str().unwrap(),
            "--out",
            out,
        ],
        dir,
    );
}

#[test]
fn benchmark_two_runs_top1() {
    let tmp = TempDir::new().unwrap();
    let train = dataset(tmp.path(), "train", 8);
    let test = dataset(tmp.path(), "test", 9);
    train_run(tmp.path(), &train, "dqn", "n3", "r1");
    train_run(tmp.path(), &train, "a2c", "n3", "r2");
    fs::write(tmp.path().join("m.json"), r#"["r1", "r2"]"#).unwrap();
    let stdout = ok(
        &[
            "benchmark",
            "--manifest",
            "m.json",
            "--test",
            test.to_str().unwrap(),
            "--k",
            "1",
            "--out-json",
            "t.json",
        ],
        tmp.path(),
    );
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("agent,range,auc,mcc,sensitivity,specificity"));
    assert_eq!(lines.count(), 2);
    assert!(tmp.path().join("t.json").is_file());
}

#[test]
fn benchmark_sorts_by_range_then_agent() {
    let tmp = TempDir::new().unwrap();
    let train = dataset(tmp.path(), "train", 10);
    for (agent, ds, out) in [
        ("dqn", "n10", "a"),
        ("a2c", "n10", "b"),
        ("dqn", "n3", "c"),
        ("a2c", "n3", "d"),
    ] {
        train_run(tmp.path(), &train, agent, ds, out);
    }
    fs::write(tmp.path().join("m.json"), r#"{"runs": ["a", "b", "c", "d"]}"#).unwrap();
    ok(
        &[
            "benchmark",
            "--manifest",
            "m.json",
            "--test",
            train.to_str().unwrap(),
            "--k",
            "1",
            "--out-csv",
            "t.csv",
        ],
        tmp.path(),
    );
    let table = fs::read_to_string(tmp.path().join("t.csv")).unwrap();
    let keys: Vec<(String, String)> = table
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_owned(), f[0].to_owned())
        })
        .collect();
    let expected = [("n-3", "A2C"), ("n-3", "DQN"), ("n-10", "A2C"), ("n-10", "DQN")];
    assert_eq!(keys, expected.map(|(r, a)| (r.to_owned(), a.to_owned())));
}

#[test]
fn benchmark_missing_run_lists_path() {
    let tmp = TempDir::new().unwrap();
    let train = dataset(tmp.path(), "train", 11);
    train_run(tmp.path(), &train, "dqn", "n3", "r1");
    fs::write(tmp.path().join("m.json"), r#"["r1", "ghost_run"]"#).unwrap();
    let out = annotator(
        &[
            "benchmark",
            "--manifest",
            "m.json",
            "--test",
            train.to_str().unwrap(),
            "--out-csv",
            "t.csv",
        ],
        tmp.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghost_run"));
    assert!(!tmp.path().join("t.csv").exists());
}
