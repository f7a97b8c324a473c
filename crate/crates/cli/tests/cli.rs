use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn kpplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpplab")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn malformed_config_key_is_named() {
    let d = scratch("bad_config");
    let cfg = d.join("model.cfg");
    fs::write(&cfg, "beta = 0.2\ngrid_stpe = 0.01\n").unwrap();
    let o = kpplab(&["--config", cfg.to_str().unwrap(), "front"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid_stpe"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_are_config_errors() {
    assert_eq!(kpplab(&["front", "--bogus"]).status.code(), Some(2));
    assert_eq!(kpplab(&["modes", "--kind", "chi", "--lambda", "0.1,0"]).status.code(), Some(2));
    assert_eq!(kpplab(&["evans", "--grid", "1,0,0,1,4"]).status.code(), Some(2));
}

#[test]
fn branch_cut_is_a_numeric_failure() {
    let o = kpplab(&["modes", "--kind", "phi+", "--lambda", "-1,0"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn csv_is_deterministic_and_carries_header() {
    let a = kpplab(&["front", "--h", "0.05"]);
    let b = kpplab(&["front", "--h", "0.05"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("# seed = 2024") && text.contains("# grid_step = 0.05"));
    let row = text.lines().find(|l| !l.starts_with('#') && !l.starts_with('x')).unwrap();
    assert!(row.split(',').all(|c| c.contains('e') && c.split('e').next().unwrap().trim_start_matches('-').len() == 18), "{row}");
}

#[test]
fn green_time_slope_summary() {
    let d = scratch("slope");
    let o = kpplab(&["--out", d.to_str().unwrap(), "--format", "svg", "green-time", "--slope", "--times", "10,20,40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&d.join("green-time.json"));
    assert!(s["summary"]["slope"].as_f64().unwrap().is_finite());
    assert_eq!(s["seed"], 2024);
    let svg = fs::read_to_string(d.join("green-time.svg")).unwrap();
    assert!(svg.contains("<polyline") && svg.contains("1e"));
    assert!(fs::read_to_string(d.join("green-time.csv")).unwrap().contains("t,sup_g"));
}

#[test]
fn verify_all_exit_status_tracks_criteria() {
    let d = scratch("verify");
    let o = kpplab(&["--out", d.to_str().unwrap(), "verify-all", "--only", "C1,C3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&d.join("verify-all.json"));
    assert_eq!(s["summary"]["criteria"]["C1"]["passed"], true);
    assert_eq!(s["summary"]["all_passed"], true);
    let o = kpplab(&["verify-all", "--only", "C7"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("C7 FAIL"));
    assert_eq!(kpplab(&["verify-all", "--only", "C99"]).status.code(), Some(2));
}

#[test]
fn report_lists_missing_summaries() {
    let d = scratch("report_empty");
    let o = kpplab(&["--out", d.to_str().unwrap(), "report"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for name in ["front", "modes", "evans", "green-lambda", "green-time", "simulate", "verify-all"] {
        assert!(e.contains(name), "{e}");
    }
}

#[test]
fn report_merges_and_is_reproducible() {
    let d = scratch("report_full");
    let out = d.to_str().unwrap();
    let runs: [&[&str]; 7] = [
        &["front"],
        &["modes", "--kind", "phi-", "--lambda", "0.1,0.1"],
        &["evans", "--grid", "0.05,2,-1,1,4"],
        &["green-lambda", "--lambda", "0.1,0.2", "--y", "-1"],
        &["green-time", "--slope", "--times", "10,20"],
        &["simulate", "--T", "20", "--samples", "6"],
        &["verify-all", "--only", "C1"],
    ];
    for r in runs {
        let mut args = vec!["--out", out];
        args.extend_from_slice(r);
        let o = kpplab(&args);
        assert!(o.status.success(), "{r:?}: {}", stderr(&o));
    }
    assert!(kpplab(&["--out", out, "report"]).status.success());
    let first = fs::read(d.join("report.json")).unwrap();
    assert!(kpplab(&["--out", out, "report"]).status.success());
    assert_eq!(first, fs::read(d.join("report.json")).unwrap());
    let r: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert!(r["green-time"]["summary"]["slope"].is_number());
    assert!(r["simulate"]["summary"]["slope"].is_number());
    assert!(r["front"]["summary"]["tail_b"].is_number());
}

#[test]
fn baselines_command_matches_shipped_format() {
    let o = kpplab(&["--format", "json", "baselines"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["time.bulk.kappa"].is_number() && v["small_lambda.i.uniform"].is_number());
}
