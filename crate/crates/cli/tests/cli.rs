use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaugekit_cli::pgm::Gray;
use gaugekit_cli::{load_spec, RunReport};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn gaugekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaugekit")).args(args).env_remove("GAUGEKIT_THREADS").output().unwrap()
}

fn solve(spec: &Path, out: &Path) -> (Output, Option<RunReport>) {
    let o = gaugekit(&["solve", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let report = std::fs::read_to_string(out.join("report.json")).ok().map(|t| serde_json::from_str(&t).unwrap());
    (o, report)
}

#[test]
fn l1_fixture_meets_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (o, report) = solve(&fixture("l1_m5_n40.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report.unwrap();
    assert!(r.bound_met);
    assert!(r.recheck_bound());
    assert_eq!(r.m, 5);
    assert!(r.r_after <= 5);
    assert!(r.recovery_error.is_some());
    let csv = std::fs::read_to_string(dir.path().join("atoms.csv")).unwrap();
    assert_eq!(csv.lines().count(), r.r_after + 1);
    assert!(csv.starts_with("index,label,kind,alpha,cost\n"));
}

#[test]
fn psd_fixture_has_few_rank_one_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let (o, report) = solve(&fixture("psd_m4.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report.unwrap();
    assert!(r.bound_met && r.recheck_bound());
    assert!(r.atoms.len() <= 4);
    assert!(r.atoms.iter().all(|a| a.label.starts_with("vvT[")));
}

#[test]
fn tv_fixture_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let (o, report) = solve(&fixture("tv_rects_8x8.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report.unwrap();
    assert!(r.bound_met);
    let u = Gray::decode(&std::fs::read(dir.path().join("u.pgm")).unwrap()).unwrap();
    assert_eq!((u.width, u.height), (8, 8));
    for k in 0..r.atoms.len() {
        let mask = Gray::decode(&std::fs::read(dir.path().join(format!("atom_{k:03}.pgm"))).unwrap()).unwrap();
        assert_eq!(mask.maxval, 1);
        assert!(mask.data.contains(&1));
    }
}

#[test]
fn report_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (_, first) = solve(&fixture("l1_m5_n40.json"), &dir.path().join("a"));
    let first = first.unwrap();
    let spec_path = dir.path().join("replay.json");
    std::fs::write(&spec_path, serde_json::to_string(&first.spec).unwrap()).unwrap();
    let (_, second) = solve(&spec_path, &dir.path().join("b"));
    assert_eq!(first.without_timings(), second.unwrap().without_timings());
}

#[test]
fn missing_y_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(
        &spec,
        r#"{ "family": { "tag": "L1Ball", "n": 3 },
             "phi": { "kind": "dense", "rows": [[1, 0, 0]] },
             "fit": { "kind": "squared_l2" } }"#,
    )
    .unwrap();
    let (o, _) = solve(&spec, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fit.y"));
}

#[test]
fn unknown_field_reports_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(
        &spec,
        r#"{ "family": { "tag": "L1Ball", "n": 3 },
             "phi": { "kind": "dense", "rows": [[1, 0, 0]] },
             "fit": { "kind": "squared_l2", "y": [1], "why": 2 } }"#,
    )
    .unwrap();
    let (o, _) = solve(&spec, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("fit") && err.contains("why"), "{err}");
}

#[test]
fn dimension_mismatch_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(
        &spec,
        r#"{ "family": { "tag": "L1Ball", "n": 4 },
             "phi": { "kind": "dense", "rows": [[1, 0, 0]] },
             "fit": { "kind": "squared_l2", "y": [1] } }"#,
    )
    .unwrap();
    let (o, _) = solve(&spec, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("phi.rows"));
}

#[test]
fn verify_bounds_suite_passes() {
    let o = gaugekit(&["verify", "--suite", "bounds", "--count", "200", "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("200/200 pass"));
}

#[test]
fn verify_tv_suite_passes() {
    let o = gaugekit(&["verify", "--suite", "tv", "--count", "40", "--seed", "1000"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn unknown_suite_exits_with_usage_error() {
    let o = gaugekit(&["verify", "--suite", "everything"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_thread_env_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_gaugekit"))
        .args(["verify", "--suite", "tv", "--count", "2"])
        .env("GAUGEKIT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_gaugekit"))
        .args(["verify", "--suite", "tv", "--count", "2"])
        .env("GAUGEKIT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(gaugekit(&[]).status.code(), Some(2));
}

#[test]
fn generate_writes_resolved_specs() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaugekit(&[
        "generate",
        "--spec",
        fixture("l1_m5_n40.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--seed",
        "40",
        "--count",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut ys = Vec::new();
    for s in 40..43 {
        let spec = load_spec(&dir.path().join(format!("spec_{s}.json"))).unwrap();
        assert_eq!(spec.fit.y_gen.as_ref().unwrap().seed, s);
        assert_eq!(spec.u_true.as_ref().unwrap().len(), 40);
        ys.push(spec.fit.y.unwrap());
    }
    assert_ne!(ys[0], ys[1]);
}

#[test]
fn generate_needs_y_gen() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaugekit(&[
        "generate",
        "--spec",
        fixture("gtv1d_samples.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
