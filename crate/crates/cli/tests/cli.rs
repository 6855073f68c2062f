use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tsproc_cli::artifact::{self, Artifact};
use tsproc_core::operations::validate_physical;
use tsproc_core::processes::{build_ocb, validate_process, ConstraintMode};

const BIN: &str = env!("CARGO_BIN_EXE_tsproc");

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture_files() -> Vec<PathBuf> {
    let mut files: Vec<_> = fs::read_dir(fixtures())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    assert!(files.len() >= 10, "fixtures missing");
    files
}

fn tsproc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not a report ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn kind_flag(path: &Path) -> &'static str {
    let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    match v["kind"].as_str().unwrap() {
        "process" => "--process",
        "operation" => "--op",
        k => panic!("unexpected fixture kind {k}"),
    }
}

#[test]
fn every_fixture_validates() {
    for f in fixture_files() {
        let out = tsproc(&["validate", kind_flag(&f), f.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", f.display(), String::from_utf8_lossy(&out.stdout));
        assert_eq!(report(&out)["passed"], true);
    }
}

fn passes(a: &Artifact) -> bool {
    match a {
        Artifact::Process(w) => validate_process(w, ConstraintMode::General, 1e-9).unwrap().passed(),
        Artifact::Operation(op) => validate_physical(op, 1e-9).unwrap().passed(),
        _ => unreachable!(),
    }
}

#[test]
fn perturbing_any_entry_breaks_validation() {
    for f in fixture_files() {
        let text = fs::read_to_string(&f).unwrap();
        let original: Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<String> = original["elements"].as_object().unwrap().keys().cloned().collect();
        for key in keys {
            let side = original["elements"][&key].as_array().unwrap().len();
            for i in 0..side {
                for j in 0..side {
                    let mut v = original.clone();
                    let entry = &mut v["elements"][&key][i][j][0];
                    *entry = Value::from(entry.as_f64().unwrap() + 1e-3);
                    let a = artifact::from_json(&v.to_string()).unwrap();
                    assert!(!passes(&a), "{} {key} ({i},{j}) still valid", f.display());
                }
            }
        }
    }
}

#[test]
fn non_hermitian_entry_names_its_key() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("ocb-bob.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(src).unwrap()).unwrap();
    v["elements"]["s1/a0/x1"][0][1][1] = Value::from(0.25);
    let path = dir.path().join("bad.json");
    fs::write(&path, v.to_string()).unwrap();
    let out = tsproc(&["validate", "--op", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    let failures = r["failures"].as_array().unwrap();
    assert!(failures
        .iter()
        .any(|f| f["constraint"] == "operation:hermiticity" && f["key"] == "s1/a0/x1"));
}

#[test]
fn truncated_file_reports_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixtures().join("ocb.json")).unwrap();
    let path = dir.path().join("cut.json");
    fs::write(&path, &text[..1234]).unwrap();
    let out = tsproc(&["validate", "--process", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("byte 1234"), "{err}");
}

#[test]
fn unknown_kind_and_missing_file_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    fs::write(&path, r#"{"kind":"superoperator","schema_version":1}"#).unwrap();
    assert_eq!(tsproc(&["classify", "--process", path.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(tsproc(&["classify", "--process", missing.to_str().unwrap()]).status.code(), Some(2));
    // an operation where a process is expected
    let op = fixtures().join("ocb-alice.json");
    assert_eq!(tsproc(&["classify", "--process", op.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tsproc(&["validate"]).status.code(), Some(2));
    assert_eq!(tsproc(&["oracle", "--game", "chess", "--direction", "forward"]).status.code(), Some(2));
    let op = fixtures().join("ocb-alice.json");
    let out = tsproc(&["validate", "--op", op.to_str().unwrap(), "--mode", "no_pre"]);
    assert_eq!(out.status.code(), Some(2));
    let p = fixtures().join("ocb.json");
    assert_eq!(tsproc(&["validate", "--process", p.to_str().unwrap(), "--mode", "lazy"]).status.code(), Some(2));
}

#[test]
fn shipped_ocb_fixture_matches_builder() {
    match artifact::load(&fixtures().join("ocb.json")).unwrap() {
        Artifact::Process(w) => assert_eq!(w, build_ocb().unwrap()),
        other => panic!("unexpected {}", other.kind()),
    }
}

#[test]
fn build_then_load_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    for target in ["ocb", "reversed-ocb", "qtf", "random-operation"] {
        let path = dir.path().join(format!("{target}.json"));
        let out = tsproc(&["build", target, "--out", path.to_str().unwrap(), "--seed", "11"]);
        assert_eq!(out.status.code(), Some(0));
        let a = artifact::load(&path).unwrap();
        let again = artifact::from_json(&artifact::to_json(&a, true)).unwrap();
        assert_eq!(a, again, "{target}");
    }
}

#[test]
fn simulate_then_score() {
    let dir = tempfile::tempdir().unwrap();
    let dist = dir.path().join("dist.json");
    let f = |n: &str| fixtures().join(n).to_str().unwrap().to_string();
    let out = tsproc(&[
        "simulate", "--process", &f("ocb.json"), "--op-a", &f("ocb-alice.json"),
        "--op-b", &f("ocb-bob.json"), "--out", dist.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let d = dist.to_str().unwrap();
    let fwd = tsproc(&["inequality", "--dist", d, "--game", "lgyni", "--direction", "forward"]);
    assert_eq!(fwd.status.code(), Some(1), "a violation is reported as a failing inequality");
    let v = report(&fwd)["values"]["lgyni/forward"].as_f64().unwrap();
    assert!((v - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-9);
    let bwd = tsproc(&["inequality", "--dist", d, "--game", "lgyni", "--direction", "backward"]);
    assert_eq!(bwd.status.code(), Some(0));
    // selection is singleton, so naming u = 0 is harmless; u = 1 is out of range
    let ok = tsproc(&["inequality", "--dist", d, "--game", "gyni", "--direction", "forward", "--u", "0"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = tsproc(&["inequality", "--dist", d, "--game", "gyni", "--direction", "forward", "--u", "1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn demos_are_deterministic_per_seed() {
    let a = tsproc(&["demo", "timeflip", "--seed", "5"]);
    let b = tsproc(&["demo", "timeflip", "--seed", "5"]);
    let c = tsproc(&["demo", "timeflip", "--seed", "6"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(report(&a)["values"], report(&c)["values"]);
}

#[test]
fn timing_is_opt_in() {
    let plain = report(&tsproc(&["demo", "inequivalence"]));
    assert!(plain.get("wall_time_s").is_none());
    let timed = report(&tsproc(&["demo", "inequivalence", "--timing"]));
    assert!(timed["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn tolerance_flag_is_respected() {
    let p = fixtures().join("ocb.json");
    let p = p.to_str().unwrap();
    // the no-pre-selection residual is 1/√2, so a loose tolerance accepts it
    assert_eq!(tsproc(&["validate", "--process", p, "--mode", "no_pre"]).status.code(), Some(1));
    assert_eq!(tsproc(&["validate", "--process", p, "--mode", "no_pre", "--tol", "0.8"]).status.code(), Some(0));
    assert_eq!(tsproc(&["validate", "--process", p, "--tol", "-1"]).status.code(), Some(2));
}
