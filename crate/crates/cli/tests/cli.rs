use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn spotcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spotcast"))
        .args(args)
        .output()
        .expect("spawn spotcast")
}

fn ok(args: &[&str]) -> String {
    let out = spotcast(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, value: serde_json::Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_lrcn() -> serde_json::Value {
    json!({"kind": "lrcn", "conv1_filters": 4, "conv2_filters": 4, "hidden": [4, 4]})
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let stdout = ok(&["generate", "--seed", "7", "--out", a.to_str().unwrap()]);
    assert!(stdout.contains("2160 records"), "{stdout}");
    ok(&["generate", "--seed", "7", "--out", b.to_str().unwrap()]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 2161);
    assert_eq!(text, fs::read_to_string(&b).unwrap());
}

#[test]
fn zero_hours_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let res = spotcast(&["generate", "--hours", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_config_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"windows": 3}));
    assert_eq!(
        spotcast(&["train", "--config", &cfg]).status.code(),
        Some(2)
    );
}

#[test]
fn train_then_evaluate_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        json!({
            "data": {"synth": {"hours": 480}},
            "window_n": 4,
            "model": small_lrcn(),
            "training": {"max_epochs": 6},
            "output_dir": out_dir,
        }),
    );
    ok(&["train", "--config", &cfg]);
    let history = fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 6);
    let artifact: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("artifact.json")).unwrap()).unwrap();
    assert_eq!(artifact["kind"], "lrcn");

    let table = ok(&["evaluate", "--config", &cfg, "--correction"]);
    assert!(table.contains("ILRCN"), "{table}");
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 2 * 3);

    ok(&["predict", "--config", &cfg]);
    let preds = fs::read_to_string(out_dir.join("predictions.csv")).unwrap();
    assert!(preds.lines().count() > 1);

    let mismatch = spotcast(&["evaluate", "--config", &cfg, "--horizon", "day_ahead"]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn naive_training_has_no_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        json!({"data": {"synth": {"hours": 300}}, "window_n": 3, "output_dir": out_dir}),
    );
    ok(&["train", "--config", &cfg, "--model", "naive"]);
    let history = fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1);
}

#[test]
fn ungated_correction_matches_the_base_model() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        json!({
            "data": {"synth": {"hours": 400, "spike_rate": 0.0, "price_load_coupling": 0.0}},
            "window_n": 4,
            "model": small_lrcn(),
            "training": {"max_epochs": 3},
            "output_dir": out_dir,
        }),
    );
    ok(&["train", "--config", &cfg]);
    ok(&["evaluate", "--config", &cfg, "--no-gate"]);
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = report
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let lrcn: Vec<_> = rows
        .iter()
        .filter(|r| r[0] == "LRCN")
        .map(|r| &r[2..])
        .collect();
    let ilrcn: Vec<_> = rows
        .iter()
        .filter(|r| r[0] == "ILRCN")
        .map(|r| &r[2..])
        .collect();
    assert_eq!(lrcn.len(), 3);
    assert_eq!(lrcn, ilrcn);
}

#[test]
fn compare_reports_every_model_per_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        json!({
            "data": {"synth": {"hours": 400}},
            "window_n": 4,
            "models": [
                {"kind": "svr"},
                {"kind": "fcnn", "hidden": [4]},
                {"kind": "lstm", "hidden": [3]},
                small_lrcn(),
                {"kind": "ilrcn", "conv1_filters": 4, "conv2_filters": 4, "hidden": [4, 4]},
            ],
            "training": {"max_epochs": 2},
            "output_dir": out_dir,
        }),
    );
    ok(&["compare", "--config", &cfg, "--thresholds", "1,2,3"]);
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    for horizon in ["hour_ahead", "day_ahead"] {
        let rows: Vec<Vec<&str>> = report
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect())
            .filter(|r: &Vec<&str>| r[1] == horizon)
            .collect();
        let mut models: Vec<&str> = rows.iter().map(|r| r[0]).collect();
        models.dedup();
        assert_eq!(models.len(), 5, "{horizon}: {models:?}");
        for chunk in rows.chunks(3) {
            let acc: Vec<f64> = chunk.iter().map(|r| r[3].parse().unwrap()).collect();
            assert!(acc[0] <= acc[1] && acc[1] <= acc[2], "{chunk:?}");
        }
    }
    let entries: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(entries.len(), 2, "{entries:?}");
}

#[test]
fn default_gates_stay_closed_on_a_spike_free_series() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let flat = json!({
        "hours": 400, "daily_amplitude": 0.0, "weekly_amplitude": 0.0, "noise_std": 0.0,
        "spike_rate": 0.0, "load_daily_amplitude": 0.0, "load_noise_std": 0.0,
        "temp_yearly_amplitude": 0.0, "temp_daily_amplitude": 0.0, "temp_noise_std": 0.0,
    });
    let cfg = write_config(
        dir.path(),
        json!({
            "data": {"synth": flat},
            "window_n": 4,
            "model": small_lrcn(),
            "training": {"max_epochs": 2},
            "output_dir": out_dir,
        }),
    );
    ok(&["train", "--config", &cfg]);
    ok(&["evaluate", "--config", &cfg, "--correction"]);
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = report
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for (l, i) in rows[..3].iter().zip(&rows[3..]) {
        assert_eq!((l[0], i[0]), ("LRCN", "ILRCN"));
        assert_eq!(l[2..], i[2..]);
    }
}
