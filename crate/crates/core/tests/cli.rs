use std::path::{Path, PathBuf};

use serde_json::Value;

use resistkit::cli::{run, Outcome, EXIT_DUAL, EXIT_INVALID, EXIT_OK, EXIT_USAGE};

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).to_str().unwrap().to_string()
}

fn cli(args: &[&str]) -> Outcome {
    run(std::iter::once("resistkit").chain(args.iter().copied()))
}

fn report(out: &Outcome) -> Value {
    serde_json::from_str(out.report.as_deref().expect("report")).unwrap()
}

#[test]
fn analyze_lin4() {
    let out = cli(&["analyze", "--predicate", &data("lin4.json")]);
    assert_eq!(out.code, EXIT_OK);
    let r = report(&out);
    assert_eq!(r["density"], "1/2");
    assert_eq!(r["even"], true);
    assert_eq!(r["relevant_sets"], serde_json::json!([[0, 1, 2, 3]]));
}

#[test]
fn analyze_glst_is_not_even() {
    let r = report(&cli(&["analyze", "--predicate", &data("glst.json")]));
    assert_eq!(r["even"], false);
    let w: Vec<i64> = serde_json::from_value(r["evenness_witness"].clone()).unwrap();
    assert_eq!(w.len(), 4);
}

#[test]
fn malformed_input_is_rejected() {
    let out = cli(&["analyze", "--predicate", &data("malformed.json")]);
    assert_eq!(out.code, EXIT_INVALID);
    assert!(out.diagnostic.unwrap().contains("line"));
    assert_eq!(cli(&["analyze"]).code, EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]).code, EXIT_USAGE);
}

#[test]
fn vanish_verdicts() {
    let out = cli(&["vanish", "--predicate", &data("lin4.json"), "--m", "4"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(report(&out)["verdict"], "primal");

    let out = cli(&["vanish", "--predicate", &data("nae3.json"), "--m", "1"]);
    assert_eq!(out.code, EXIT_DUAL);
    assert!(report(&out)["margin"].as_f64().unwrap() >= 1.0 / 3.0 - 1e-6);

    let out = cli(&["vanish", "--predicate", &data("xor2.json"), "--m", "1"]);
    assert_eq!(out.code, EXIT_DUAL);
    assert!(report(&out)["margin"].as_f64().unwrap() >= 1.0 - 1e-6);

    let out = cli(&["vanish", "--predicate", &data("glst.json"), "--m", "1"]);
    assert_eq!(out.code, EXIT_INVALID);
}

#[test]
fn gen_and_round_planted_nae() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let sol = dir.path().join("sol.json");
    let p = |x: &PathBuf| x.to_str().unwrap().to_string();
    let out = cli(&[
        "gen", "--predicate", &data("nae3.json"), "--n", "50", "--constraints", "300",
        "--pool-pattern", "1,1,-1;1,-1,1;-1,1,1", "--seed", "4", "--instance", &p(&inst), "--solution", &p(&sol),
    ]);
    assert_eq!(out.code, EXIT_OK);
    let g = report(&out);
    assert_eq!(g["feasible"], true);
    assert!((g["objective"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let out = cli(&[
        "round", "--instance", &p(&inst), "--solution", &p(&sol), "--certificate", &data("nae3_m1_certificate.json"),
        "--rounds", "2000", "--seed", "1",
    ]);
    assert_eq!(out.code, EXIT_OK);
    let r = report(&out);
    assert!(r["satisfied_fraction"]["mean"].as_f64().unwrap() > 0.75);
    assert_eq!(r["satisfied_fraction"]["samples"], 2000);
    assert!(r["advantage"].as_f64().unwrap() > 0.0);
}

#[test]
fn round_rejects_mismatched_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json").to_str().unwrap().to_string();
    let sol = dir.path().join("sol.json").to_str().unwrap().to_string();
    let out = cli(&["gen", "--predicate", &data("nae3.json"), "--n", "4", "--constraints", "5", "--pool", "1", "--instance", &inst, "--solution", &sol]);
    assert_eq!(out.code, EXIT_OK);
    let out = cli(&["round", "--instance", &inst, "--solution", &sol, "--certificate", &data("xor2_m1_certificate.json"), "--rounds", "10"]);
    assert_eq!(out.code, EXIT_INVALID);
}

#[test]
fn gen_with_empty_pool_fails() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.json").to_str().unwrap().to_string();
    let sol = dir.path().join("s.json").to_str().unwrap().to_string();
    let out = cli(&["gen", "--predicate", &data("nae3.json"), "--n", "3", "--constraints", "2", "--pool", "0", "--instance", &inst, "--solution", &sol]);
    assert_eq!(out.code, EXIT_INVALID);
    assert!(out.diagnostic.unwrap().contains("empty"));
}

#[test]
fn isserlis_identity_is_zero() {
    let r = report(&cli(&["isserlis", "--cov", "identity:4", "--indices", "0,1,2,3"]));
    assert_eq!(r["value"], "0/1");
    assert_eq!(r["matchings"], 3);
    let r = report(&cli(&["isserlis", "--cov", "identity:2", "--indices", "0,0,1,1"]));
    assert_eq!(r["value"], "1/1");
}

#[test]
fn enum_graphs_counts() {
    let r = report(&cli(&["enum-graphs", "--vertices", "0,1", "--m", "4"]));
    assert_eq!(r["total"], 2);
    let r = report(&cli(&["enum-graphs", "--predicate", &data("lin4.json"), "--m", "3"]));
    assert_eq!(r["total"], 7);
}

#[test]
fn dict_test_completeness() {
    let out = cli(&[
        "dict-test", "--predicate", &data("lin4.json"), "--certificate", &data("lin4_m8_certificate.json"),
        "--epsilon", "0.1", "--functions", "dictator:4:3",
    ]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(report(&out)["report"]["exact_probability"], "19/20");

    let out = cli(&[
        "dict-test", "--predicate", &data("lin4.json"), "--certificate", &data("nae3_m1_certificate.json"),
        "--epsilon", "0.1", "--functions", "dictator:4:3",
    ]);
    assert_eq!(out.code, EXIT_INVALID);
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = cli(&["analyze", "--predicate", &data("nae3.json"), "--out", path.to_str().unwrap()]);
    assert!(out.written);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), out.report.unwrap());
}
