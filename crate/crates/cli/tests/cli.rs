use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn loadcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loadcast"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = loadcast(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: &str) -> String {
    let out = loadcast(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with(&format!("{code}: ")), "{args:?}: {err}");
    err
}

/// One year of synthetic data in `data/`.
fn synth() -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--years", "1", "--seed", "5", "--out", "data"]);
    let root = tmp.path().to_path_buf();
    (tmp, root)
}

const QUICK_FCNN: &str = r#"
seed = 3
out = "model"
[data]
aligned = "data/aligned.csv"
[model]
kind = "fcnn"
fcnn_hidden = [16, 8]
[training]
max_epochs = 3
"#;

#[test]
fn synth_then_ingest_reproduces_aligned_table() {
    let (_tmp, dir) = synth();
    let summary = ok(&dir, &["ingest", "data/load.csv", "data/weather.csv", "--out", "ingested"]);
    assert!(summary.contains("rows: 8760"), "{summary}");
    assert!(summary.contains("segments: 1"), "{summary}");
    assert_eq!(
        fs::read(dir.join("data/aligned.csv")).unwrap(),
        fs::read(dir.join("ingested/aligned.csv")).unwrap()
    );
    assert_eq!(fs::read_to_string(dir.join("data/load.csv")).unwrap().lines().count(), 8761);
    assert_eq!(fs::read_to_string(dir.join("data/weather.csv")).unwrap().lines().count(), 8 * 8760 + 1);
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let (_tmp, dir) = synth();
    ok(&dir, &["synth", "--years", "1", "--seed", "5", "--out", "again"]);
    for f in ["load.csv", "weather.csv", "aligned.csv"] {
        assert_eq!(fs::read(dir.join("data").join(f)).unwrap(), fs::read(dir.join("again").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn ingest_reports_gaps_and_rejects_disjoint_ranges() {
    let (_tmp, dir) = synth();
    let load = fs::read_to_string(dir.join("data/load.csv")).unwrap();
    let lines: Vec<&str> = load.lines().collect();
    let gapped: Vec<&str> = lines.iter().enumerate().filter(|(i, _)| !(100..110).contains(i)).map(|(_, l)| *l).collect();
    fs::write(dir.join("gapped.csv"), gapped.join("\n") + "\n").unwrap();
    let summary = ok(&dir, &["ingest", "gapped.csv", "data/weather.csv", "--out", "g"]);
    assert!(summary.contains("segments: 2"), "{summary}");
    assert!(summary.contains("gaps: 1"), "{summary}");

    let shifted: Vec<String> = std::iter::once(lines[0].to_string())
        .chain(lines[1..].iter().map(|l| l.replacen("2018-", "2031-", 1)))
        .collect();
    fs::write(dir.join("late.csv"), shifted.join("\n") + "\n").unwrap();
    let err = fails(&dir, &["ingest", "late.csv", "data/weather.csv"], "E_EMPTY_INTERSECTION");
    assert!(err.contains("no complete hour in common"), "{err}");
}

#[test]
fn train_writes_artifacts_and_is_reproducible() {
    let (_tmp, dir) = synth();
    fs::write(dir.join("run.toml"), QUICK_FCNN).unwrap();
    ok(&dir, &["train", "--config", "run.toml"]);
    for f in ["model.lcst", "history.csv", "config.toml"] {
        assert!(dir.join("model").join(f).is_file(), "{f}");
    }
    let history = fs::read_to_string(dir.join("model/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);
    ok(&dir, &["train", "--config", "run.toml", "--out", "again"]);
    assert_eq!(fs::read(dir.join("model/model.lcst")).unwrap(), fs::read(dir.join("again/model.lcst")).unwrap());
    ok(&dir, &["train", "--config", "run.toml", "--seed", "4", "--out", "other"]);
    assert_ne!(fs::read(dir.join("model/model.lcst")).unwrap(), fs::read(dir.join("other/model.lcst")).unwrap());
    let echoed = fs::read_to_string(dir.join("other/config.toml")).unwrap();
    assert!(echoed.contains("seed = 4"), "{echoed}");
    assert!(echoed.contains("batch_size = 256"), "{echoed}");
}

#[test]
fn resolved_config_trains_the_same_model() {
    let (_tmp, dir) = synth();
    fs::write(dir.join("run.toml"), QUICK_FCNN).unwrap();
    ok(&dir, &["train", "--config", "run.toml"]);
    ok(&dir, &["train", "--config", "model/config.toml", "--out", "echo"]);
    assert_eq!(fs::read(dir.join("model/model.lcst")).unwrap(), fs::read(dir.join("echo/model.lcst")).unwrap());
}

#[test]
fn default_model_config_trains() {
    let (_tmp, dir) = synth();
    fs::write(
        dir.join("run.toml"),
        "out = \"lstm\"\n[data]\naligned = \"data/aligned.csv\"\n[training]\nmax_epochs = 1\n",
    )
    .unwrap();
    let out = ok(&dir, &["train", "--config", "run.toml"]);
    assert!(out.contains("model: lstm"), "{out}");
    assert!(dir.join("lstm/model.lcst").is_file());
}

#[test]
fn bad_configs_fail_before_reading_data() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("zero.toml"), "[data]\naligned = \"missing.csv\"\n[window]\nt1 = 0\n").unwrap();
    let err = fails(dir, &["train", "--config", "zero.toml"], "E_INVALID_CONFIG");
    assert!(err.contains("t1 = 0"), "{err}");
    fs::write(dir.join("typo.toml"), "[training]\nepochs = 3\n").unwrap();
    fails(dir, &["train", "--config", "typo.toml"], "E_CONFIG_PARSE");
    fails(dir, &["train", "--config", "absent.toml"], "E_IO");
}

#[test]
fn evaluate_trained_and_persistence() {
    let (_tmp, dir) = synth();
    fs::write(dir.join("run.toml"), QUICK_FCNN).unwrap();
    ok(&dir, &["train", "--config", "run.toml"]);
    let out = ok(&dir, &["evaluate", "model/model.lcst", "data/aligned.csv", "--out", "ev"]);
    assert!(out.contains("MAPE: "), "{out}");
    for f in ["report.json", "pred_vs_actual.csv", "error_histogram.csv", "scatter_load_vs_weather.csv"] {
        assert!(dir.join("ev").join(f).is_file(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("ev/report.json")).unwrap()).unwrap();
    for key in ["model", "split", "samples", "horizon", "mape", "r2", "tolerance_accuracy", "per_horizon", "origins", "predicted", "actual"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["model"], "fcnn");
    assert_eq!(report["split"], "test");
    let samples = report["samples"].as_u64().unwrap() as usize;
    assert_eq!(report["predicted"].as_array().unwrap().len(), samples * 4);
    assert_eq!(report["tolerance_accuracy"].as_array().unwrap().len(), 5);

    ok(&dir, &["evaluate", "persistence", "data/aligned.csv", "--split", "val", "--out", "pers"]);
    let pers: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("pers/report.json")).unwrap()).unwrap();
    assert_eq!(pers["model"], "persistence");
    assert_eq!(pers["split"], "val");

    fails(&dir, &["evaluate", "nowhere.lcst", "data/aligned.csv"], "E_IO");
    fs::write(dir.join("junk.lcst"), b"not a model").unwrap();
    fails(&dir, &["evaluate", "junk.lcst", "data/aligned.csv"], "E_CORRUPT_ARTIFACT");
}

#[test]
fn predict_forecasts_the_following_hours() {
    let (_tmp, dir) = synth();
    fs::write(dir.join("run.toml"), QUICK_FCNN).unwrap();
    ok(&dir, &["train", "--config", "run.toml"]);
    let out = ok(&dir, &["predict", "model/model.lcst", "data/aligned.csv", "--at", "2018-05-01T12:00:00"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5, "{out}");
    assert!(lines[1].starts_with("2018-05-01T13:00:00,"));
    assert!(lines[4].starts_with("2018-05-01T16:00:00,"));

    let aligned = fs::read_to_string(dir.join("data/aligned.csv")).unwrap();
    let load_at = aligned
        .lines()
        .find(|l| l.starts_with("2018-05-01T12:00:00,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse::<f64>()
        .unwrap();
    let out = ok(&dir, &["predict", "persistence", "data/aligned.csv", "--at", "2018-05-01T12:00:00"]);
    for line in out.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - load_at).abs() < 1e-3, "{line} vs {load_at}");
    }

    fails(&dir, &["predict", "model/model.lcst", "data/aligned.csv", "--at", "2030-01-01T00:00:00"], "E_STAMP_NOT_FOUND");
    fails(&dir, &["predict", "model/model.lcst", "data/aligned.csv", "--at", "2018-01-01T02:00:00"], "E_SHAPE_MISMATCH");
}

#[test]
fn predict_rejects_windows_across_a_gap() {
    let (_tmp, dir) = synth();
    fs::write(dir.join("run.toml"), QUICK_FCNN).unwrap();
    ok(&dir, &["train", "--config", "run.toml"]);
    let aligned = fs::read_to_string(dir.join("data/aligned.csv")).unwrap();
    let kept: Vec<&str> = aligned
        .lines()
        .filter(|l| !l.starts_with("2018-05-01T10:00:00") && !l.starts_with("2018-05-01T11:00:00"))
        .collect();
    fs::write(dir.join("gapped.csv"), kept.join("\n") + "\n").unwrap();
    let err = fails(&dir, &["predict", "model/model.lcst", "gapped.csv", "--at", "2018-05-01T13:00:00"], "E_NOT_CONTIGUOUS");
    assert!(err.contains("2018-05-01T09:00:00"), "{err}");
}

#[test]
fn grid_table1_writes_four_rows() {
    let (_tmp, dir) = synth();
    let out = ok(&dir, &["grid", "table1", "data/aligned.csv", "--seeds", "0", "--max-epochs", "1", "--out", "t1"]);
    assert!(out.contains("persistence benchmark"), "{out}");
    let csv = fs::read_to_string(dir.join("t1/tables/table1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    for row in ["svr", "fcnn", "lstm", "lrcn"] {
        assert!(dir.join("t1/rows").join(row).join("seed0/model.lcst").is_file(), "{row}");
    }
    assert!(dir.join("t1/grid.json").is_file());
    assert!(dir.join("t1/tables/table1.txt").is_file());
}

#[test]
fn unknown_grid_lists_builtins() {
    let (_tmp, dir) = synth();
    let err = fails(&dir, &["grid", "table9", "data/aligned.csv"], "E_UNKNOWN_GRID");
    assert!(err.contains("table1, table2, table3, table4, table5"), "{err}");
}

const SMALL_GRID: &str = r#"
name = "small"
style = "table1"
seeds = [0, 1]

[[rows]]
name = "fcnn-a"
selector = { time_features = ["hour"] }
spec = { kind = "fcnn", fcnn_hidden = [8], training = { max_epochs = 2 } }

[[rows]]
name = "fcnn-b"
selector = { weather_features = ["temp"] }
spec = { kind = "fcnn", fcnn_hidden = [8], training = { max_epochs = 2 } }
"#;

#[test]
fn interrupted_grid_resumes_without_retraining() {
    let (_tmp, dir) = synth();
    fs::write(dir.join("small.toml"), SMALL_GRID).unwrap();
    ok(&dir, &["grid", "small.toml", "data/aligned.csv", "--workers", "2", "--out", "g"]);
    let first = fs::read(dir.join("g/tables/table1.csv")).unwrap();
    let kept = dir.join("g/rows/fcnn-a/seed0/model.lcst");
    let stamp = fs::metadata(&kept).unwrap().modified().unwrap();
    fs::remove_dir_all(dir.join("g/rows/fcnn-b/seed1")).unwrap();
    fs::remove_dir_all(dir.join("g/tables")).unwrap();
    fs::remove_file(dir.join("g/grid.json")).unwrap();

    ok(&dir, &["grid", "small.toml", "data/aligned.csv", "--out", "g"]);
    assert_eq!(fs::metadata(&kept).unwrap().modified().unwrap(), stamp);
    assert!(dir.join("g/rows/fcnn-b/seed1/model.lcst").is_file());
    assert_eq!(fs::read(dir.join("g/tables/table1.csv")).unwrap(), first);
}

#[test]
fn every_command_documents_its_flags() {
    let tmp = TempDir::new().unwrap();
    let cases: [(&str, &[&str]); 7] = [
        ("ingest", &["--out"]),
        ("synth", &["--years", "--seed", "--out"]),
        ("train", &["--config", "--seed", "--out"]),
        ("evaluate", &["--split", "--config", "--out"]),
        ("predict", &["--at", "--config"]),
        ("grid", &["--workers", "--seeds", "--max-epochs", "--out"]),
        ("ablate", &["--workers", "--seeds", "--max-epochs", "--out"]),
    ];
    for (cmd, flags) in cases {
        let help = ok(tmp.path(), &[cmd, "--help"]);
        for flag in flags {
            assert!(help.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}
