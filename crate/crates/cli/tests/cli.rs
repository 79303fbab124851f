use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn gasket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasket")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn bound_reports_exact_rationals() {
    let out = gasket(&["bound", "--p", "1", "--l", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["threshold"], "13/3");
    assert_eq!(v["min_generation"], 3);
    assert_eq!(v["dj_cap"], 1);
    let v = json(&gasket(&["bound", "--p", "1", "--l", "2", "--diameter", "7"]));
    assert_eq!(v["inverse"]["bound"], "3/2");
    assert_eq!(v["inverse"]["min_layers"], 2);
}

#[test]
fn usage_errors_exit_one() {
    let out = gasket(&["detect", "--gen", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage error"));
    assert_eq!(gasket(&["lattice", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(gasket(&["bound", "--p", "0", "--l", "1"]).status.code(), Some(1));
    assert_eq!(gasket(&["bound", "--p", "1", "--l", "1", "--format", "csv"]).status.code(), Some(1));
    assert_eq!(gasket(&["--help"]).status.code(), Some(0));
}

#[test]
fn counts_and_expectations() {
    let v = json(&gasket(&["count", "--gen", "2"]));
    assert_eq!(v["count"], "4096");
    assert_eq!(v["log2_count"], 12);
    let v = json(&gasket(&["count", "--gen", "3", "--fix", "0=1", "--fix", "TLr=2"]));
    assert_eq!(v["log2_count"], 35);
    let v = json(&gasket(&["expect", "--gen", "3", "--sites", "0,5", "--op-out", "12", "--op-in", "12"]));
    assert_eq!(v["value"]["rational"], "1/16");
    assert_eq!(v["value"]["exact"], serde_json::json!({"a": 1, "b": 0, "e": -4}));
}

#[test]
fn reruns_are_byte_identical_and_manifests_match() {
    let a = gasket(&["correlate", "--gen", "2", "--format", "csv"]);
    let b = gasket(&["correlate", "--gen", "2", "--format", "csv"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("vertex_i,vertex_j,distance,op_in,op_out,value_num,value_den\n"));
    assert_eq!(text.lines().count(), 1 + 24 * 256);

    let dir = std::env::temp_dir().join(format!("gasket-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("detect.csv");
    let out = gasket(&["detect", "--gen", "3", "--seed", "5", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let body = std::fs::read(&path).unwrap();
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.join("detect.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["output_sha256"], hex::encode(Sha256::digest(&body)));
    assert_eq!(manifest["subcommand"], "detect");
    assert_eq!(manifest["seed"], 5);
    assert!(String::from_utf8(body).unwrap().starts_with("support,diameter,ops_checked,failures\n"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn json_keys_are_sorted() {
    let out = gasket(&["tensor", "check", "--gen", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \"") && !l.starts_with("   "))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_unstable();
    assert_eq!(keys, sorted);
    assert_eq!(json_of(&text)["lambda"]["exact"], serde_json::json!({"a": 0, "b": 1, "e": 1}));
}

fn json_of(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn experiment_subcommands() {
    let v = json(&gasket(&["prepare", "--gen", "1"]));
    assert_eq!(v["equals_psi"], true);
    assert_eq!(v["orbit"]["orbit_size"], 8);
    let v = json(&gasket(&["flipper", "--gen", "2", "--forbid", "0,4,8"]));
    assert_eq!(v["weight"], 3);
    assert_eq!(v["check"]["maps_psi_to_phi"], true);
    let v = json(&gasket(&["flipper", "--gen", "2", "--forbid", "0,1,2,3,4,5,6,7,8"]));
    assert!(v["flipper"].is_null());
    let v = json(&gasket(&["canon", "--gen", "3", "--seed", "3", "--respect-laterals"]));
    assert_eq!(v["forms"][0]["form"], "0".repeat(27));
    let v = json(&gasket(&["canon", "--gen", "3", "--seed", "3"]));
    assert_eq!(v["forms"].as_array().unwrap().len(), 2);
    let v = json(&gasket(&["lattice", "--gen", "3"]));
    assert_eq!(v["diameter"], 7);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 27);
    let out = gasket(&["ops", "dump", "--gen", "1"]);
    assert_eq!(json(&out)["t_gates"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_all_passes_at_generation_two() {
    let out = gasket(&["verify-all", "--gen", "2", "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out)["pass"], true);
}
