use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bsake::app::RUN_OUTPUTS;

fn bsake(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsake"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SYNTH: &str = r#"{
    "length": 72, "base": 1000, "slope": 2, "amplitude": 200, "noise_sd": 20,
    "keywords": [{"name": "kw_a", "lag": 1, "noise": 0.1}, {"name": "kw_b", "lag": 2, "noise": 0.1}],
    "noise_keywords": 1, "economic": true, "seed": 3
}"#;

fn run_config(seed: Option<u64>) -> String {
    let seed = seed.map(|s| format!(r#", "seed": {s}"#)).unwrap_or_default();
    format!(
        r#"{{
            "country": "demo",
            "arrivals": "data/arrivals.csv",
            "keywords": "data/keywords.csv",
            "economic": "data/economic.csv",
            "horizons": [1, 2],
            "models": ["KELM", "SAKE", "B-SAKE"],
            "pipeline": {{
                "split": "2014-01", "target_lags": 3, "replicates": 2,
                "sae_layers": [3], "gamma_grid": [1.0], "c_grid": [100.0],
                "sae_training": {{"epochs": 20, "learning_rate": 10, "batch_size": 32, "seed": 0}}
                {seed}
            }}
        }}"#
    )
}

fn synth_into(dir: &Path) {
    let spec = dir.join("spec.json");
    fs::write(&spec, SYNTH).unwrap();
    let data = dir.join("data");
    let o = bsake(&["--quiet", "synth", "--config", spec.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn synth_then_run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path());
    for f in ["arrivals.csv", "keywords.csv", "economic.csv", "schema.json"] {
        assert!(dir.path().join("data").join(f).is_file(), "{f}");
    }
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, run_config(Some(5))).unwrap();
    let out = dir.path().join("out");
    let o = bsake(&["--quiet", "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in RUN_OUTPUTS {
        assert!(out.join(f).is_file(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(report["demo"]["2"]["out_of_sample"]["B-SAKE"]["mape"].is_number());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["pipeline"]["seed"], 5);
    let forecasts = fs::read_to_string(out.join("forecasts.csv")).unwrap();
    assert!(forecasts.starts_with("origin,target,horizon,model,value"));
}

#[test]
fn overrides_replace_config_values() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path());
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, run_config(Some(5))).unwrap();
    let out = dir.path().join("o");
    let o = bsake(&[
        "--quiet", "--threads", "1", "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--seed", "9", "--horizons", "1", "--models", "KELM,B-KELM",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    let horizons = report["demo"].as_object().unwrap();
    assert_eq!(horizons.keys().collect::<Vec<_>>(), ["1"]);
    let mut models: Vec<&String> = horizons["1"]["out_of_sample"].as_object().unwrap().keys().collect();
    models.sort();
    assert_eq!(models, ["B-KELM", "KELM"]);
}

#[test]
fn select_keywords_writes_the_selection() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path());
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, run_config(Some(1))).unwrap();
    let out = dir.path().join("o");
    let o = bsake(&["--quiet", "select-keywords", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("keyword_selection.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn missing_seed_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, run_config(None)).unwrap();
    let o = bsake(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error[config/"), "{err}");
    assert!(err.contains("seed"), "{err}");
}

#[test]
fn unreadable_input_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, run_config(Some(1))).unwrap();
    let o = bsake(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("arrivals.csv"), "{}", stderr(&o));
}

#[test]
fn bad_invocations_exit_two() {
    assert_eq!(bsake(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bsake(&["run"]).status.code(), Some(2));
    assert_eq!(bsake(&["run", "--config", "x.json", "--models", "GBM"]).status.code(), Some(2));
    assert_eq!(bsake(&["run", "--config", "x.json", "--split", "2019-13"]).status.code(), Some(2));
}

fn write_eval_inputs(dir: &Path, forecasts: &str, actuals: &str) -> (String, String) {
    let f = dir.join("f.csv");
    let a = dir.join("a.csv");
    fs::write(&f, forecasts).unwrap();
    fs::write(&a, actuals).unwrap();
    (f.to_str().unwrap().into(), a.to_str().unwrap().into())
}

fn eval_json(args: &[&str]) -> serde_json::Value {
    let o = bsake(args);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn eval_scores_perfect_and_worked_forecasts() {
    let dir = tempfile::tempdir().unwrap();
    let (f, a) = write_eval_inputs(
        dir.path(),
        "month,perfect\n2020-01,1\n2020-02,3\n2020-03,2\n2020-04,5\n",
        "month,y\n2019-12,9\n2020-01,1\n2020-02,3\n2020-03,2\n2020-04,5\n2020-05,8\n",
    );
    let v = eval_json(&["eval", "--forecasts", &f, "--actuals", &a]);
    assert_eq!(v["metrics"]["perfect"]["mape"], 0.0);
    assert_eq!(v["metrics"]["perfect"]["ds"], 100.0);

    let (f, a) = write_eval_inputs(dir.path(), "month,m\n2020-01,110\n2020-02,180\n", "month,y\n2020-01,100\n2020-02,200\n");
    let v = eval_json(&["eval", "--forecasts", &f, "--actuals", &a]);
    assert!((v["metrics"]["m"]["mape"].as_f64().unwrap() - 10.0).abs() < 1e-12);
}

#[test]
fn eval_dm_needs_two_models() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (1..=12).map(|m| format!("2020-{m:02},{}\n", 100 + m)).collect();
    let (f, a) = write_eval_inputs(dir.path(), &format!("month,m\n{rows}"), &format!("month,y\n{rows}"));
    let o = bsake(&["eval", "--forecasts", &f, "--actuals", &a, "--dm"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("two models required"));

    let two: String = (1..=12)
        .map(|m| format!("2020-{m:02},{},{}\n", 100 + m + m % 3, 100 + m + 2 * (m % 4)))
        .collect();
    let (f, a) = write_eval_inputs(dir.path(), &format!("month,p,q\n{two}"), &format!("month,y\n{rows}"));
    let out = dir.path().join("eval.json");
    let o = bsake(&["eval", "--forecasts", &f, "--actuals", &a, "--dm", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out).unwrap()).unwrap();
    assert!(v["dm"]["q"]["p"]["statistic"].is_number());
}
