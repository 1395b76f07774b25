use std::path::Path;
use std::process::{Command, Output};

fn tsclass(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsclass")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr_line(o: &Output) -> String {
    let text = String::from_utf8_lossy(&o.stderr).to_string();
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("error code=")).collect();
    assert_eq!(lines.len(), 1, "{text}");
    lines[0].to_string()
}

fn synth_csv(dir: &Path) {
    let o = tsclass(&["synth", "--kind", "planted_signal", "--n", "500", "--out", "s"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_error_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["backtest", "--mode", "sideways"][..], &["backtest", "--set", "nonsense=1"], &["bogus"]] {
        let o = tsclass(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr_line(&o).contains("exit=2"));
    }
}

#[test]
fn data_error_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "date,close\n2024-01-01,1\n2024-01-02,x\n").unwrap();
    let o = tsclass(&["ingest", "--input", "bad.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr_line(&o).starts_with("error code=UNPARSABLE_CELL exit=3 message="));
    let o = tsclass(&["ingest", "--input", "missing.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn failed_gradcheck_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsclass(&["gradcheck", "--seeds", "1", "--tolerance", "0", "--out", "g"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr_line(&o).starts_with("error code=GRADCHECK_FAILED exit=4"));
    let o = tsclass(&["gradcheck", "--seeds", "1", "--out", "g"], dir.path());
    assert!(o.status.success());
    assert!(dir.path().join("g/gradcheck.json").exists());
}

#[test]
fn backtest_then_report() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path());
    std::fs::write(
        dir.path().join("run.cfg"),
        "# scenario\ninput=s/synthetic.csv\nfamilies=logistic\n[data]\nstart=0\nlen=all\n[grid]\nlogistic.C=1\n",
    )
    .unwrap();
    let o = tsclass(&["backtest", "--config", "run.cfg", "--seed", "4", "--format", "csv,json,svg", "--out", "r"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "report_logistic.json", "curves_logistic.csv", "curves_logistic.svg", "model_logistic.json"] {
        assert!(dir.path().join("r").join(f).exists(), "{f}");
    }
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 4);
    assert_eq!(m["command"], "backtest");
    let o = tsclass(&["report", "--run", "r"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("logistic"));
    assert!(dir.path().join("r/summary.csv").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path());
    std::fs::write(dir.path().join("a.cfg"), "seed=1\nmode=paper\n").unwrap();
    let o = tsclass(&["label", "--config", "a.cfg", "--input", "s/synthetic.csv", "--mode", "leakfree", "--out", "l"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("l/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["mode"], "leakfree");
    assert_eq!(m["seed"], 1);
    let rows = std::fs::read_to_string(dir.path().join("l/labels.csv")).unwrap().lines().count();
    assert_eq!(rows, 500);
}

#[test]
fn train_writes_grid_results() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path());
    let o = tsclass(
        &["train", "--input", "s/synthetic.csv", "--set", "data.start=0", "--set", "data.len=all", "--families", "ridge", "--out", "t"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t/grid_ridge.json")).unwrap()).unwrap();
    assert_eq!(g["candidates"].as_array().unwrap().len(), 3);
    assert!(g["best"]["params"]["alpha"].is_number());
}
