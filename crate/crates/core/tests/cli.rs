use std::path::Path;
use std::process::{Command, Output};

use blotless::numerics::read_matrix;

fn blotless(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blotless"))
        .args(args)
        .output()
        .expect("spawn blotless")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bounds_prints_json() {
    let out = blotless(&["bounds", "--m", "30", "--theta", "0.2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_star_rounded"], 65);
}

#[test]
fn bounds_table_is_csv() {
    let out = blotless(&["bounds"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let metric = headers.iter().position(|h| h == "metric").unwrap();
    let value = headers.iter().position(|h| h == "value").unwrap();
    let rounded: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[metric] == "n_star_rounded")
        .map(|r| r[value].parse().unwrap())
        .collect();
    assert_eq!(rounded, [121.0, 65.0, 64.0, 78.0]);
}

#[test]
fn usage_and_domain_errors_exit_with_one() {
    assert_eq!(
        blotless(&["bounds", "--m", "30", "--theta", "1.5"]).status.code(),
        Some(1)
    );
    assert_eq!(blotless(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        blotless(&["learn", "--y", "/nonexistent", "--k", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(blotless(&["--help"]).status.code(), Some(0));
}

#[test]
fn gen_update_and_learn_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("set");
    let out = blotless(&[
        "gen",
        "--m",
        "8",
        "--n",
        "60",
        "--theta",
        "0.25",
        "--seed",
        "4",
        "--out",
        path(&prefix),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    let find = |needle: &str| {
        let name = files
            .iter()
            .find(|f| f.contains(needle))
            .unwrap_or_else(|| panic!("no {needle} file in {files:?}"));
        dir.path().join(name)
    };
    let (y, pattern, d0) = (find(".y."), find(".pattern."), find(".d0."));

    let updated = dir.path().join("d.txt");
    let out = blotless(&[
        "update",
        "--y",
        path(&y),
        "--pattern",
        path(&pattern),
        "--out",
        path(&updated),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = read_matrix(std::io::BufReader::new(std::fs::File::open(&updated).unwrap())).unwrap();
    assert_eq!(d.shape(), (8, 8));

    let history = dir.path().join("history.csv");
    let learned = dir.path().join("learned.txt");
    let out = blotless(&[
        "learn",
        "--y",
        path(&y),
        "--k",
        "2",
        "--iterations",
        "3",
        "--reference",
        path(&d0),
        "--history",
        path(&history),
        "--out",
        path(&learned),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&history).unwrap().lines().count(), 4);
}

#[test]
fn experiment_output_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind":"PHASE_TRANSITION","n":[40,60],"trials":6}"#).unwrap();
    let run = |threads: &str| {
        let out = blotless(&["phase", "--spec", path(&spec), "--threads", threads]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn mismatched_spec_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind":"LEARN_CURVE"}"#).unwrap();
    assert_eq!(blotless(&["phase", "--spec", path(&spec)]).status.code(), Some(1));
}
