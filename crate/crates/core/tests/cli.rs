use std::path::Path;
use std::process::{Command, Output};

fn relayee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relayee"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analyze_writes_both_modes() {
    let o = relayee(&["analyze", "--snr-db", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("mode,alpha,snr_db,drop_source,"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("relay,"));
    assert!(lines[2].starts_with("direct,"));
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let file = relayee(&["sweep-alpha", "--alpha-grid", "0.2:0.8:0.2", "-o", out.to_str().unwrap()]);
    assert_eq!(file.status.code(), Some(0));
    let stdout = relayee(&["sweep-alpha", "--alpha-grid", "0.2,0.4,0.6,0.8"]);
    assert_eq!(std::fs::read(&out).unwrap(), stdout.stdout);
    assert_eq!(stdout.stdout.iter().filter(|&&b| b == b'\n').count(), 5);
}

#[test]
fn preset_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = \"paper-default\"\n[traffic]\nlambda = 2.0\n");
    let o = relayee(&["-c", &cfg, "sweep-buffer", "--buffers", "5,10", "--points", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = relayee(&["-c", "/nonexistent/run.toml", "analyze"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = \"paper-default\"\n[traffic]\nlambdaa = 2.0\n");
    let o = relayee(&["-c", &cfg, "analyze"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambdaa"), "{}", stderr(&o));
}

#[test]
fn missing_key_without_preset_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let full = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper-default.toml")).unwrap();
    let body: String = full
        .lines()
        .filter(|l| !l.starts_with("lambda"))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg = config(dir.path(), &body);
    let o = relayee(&["-c", &cfg, "analyze"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("traffic.lambda"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(relayee(&["analyze", "--snr-db", "five"]).status.code(), Some(2));
    assert_eq!(relayee(&["switch-threshold"]).status.code(), Some(2));
    // a trace needs a single mode, SNR and seed
    let o = relayee(&["simulate", "--slots", "100", "--trace", "/dev/null"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infeasible_budget_exits_3() {
    let o = relayee(&["optimize", "--alpha-grid", "0.5", "--delay-budget", "0.5"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn failed_validation_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "preset = \"paper-default\"\n\
         [simulate]\nslots = 20000\nwarmup = 1000\nseeds = [1]\nsnr_db = [10.0]\n\
         [simulate.tolerances]\nee_rel = 1e-9\n",
    );
    let o = relayee(&["-c", &cfg, "validate"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.lines().any(|l| l.contains("ee") && l.ends_with("false")), "{csv}");
}

#[test]
fn trace_has_one_row_per_slot() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let o = relayee(&[
        "simulate", "--slots", "300", "--warmup", "0", "--mode", "direct", "--snr-db", "10", "--seeds", "4",
        "--trace", trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("slot,chan_src,chan_rly,avail_ar,avail_rd,q_src,q_rly,tx_ok,energy_j\n"));
    assert_eq!(text.lines().count(), 301);
}
