use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn qagg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qagg")).args(args).env_remove("QAGG_FORMAT").output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = qagg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn error(args: &[&str]) -> (i32, Value) {
    let out = qagg(args);
    assert!(out.stdout.is_empty());
    let err: Value = serde_json::from_slice(&out.stderr).expect("JSON error on stderr");
    (out.status.code().unwrap(), err)
}

fn path(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

#[test]
fn mincut_single_edge() {
    let r = report(&["mincut", "--input", &path("single_edge.json")]);
    assert_eq!(r["result"]["C"], 5);
    assert_eq!(r["schema"], "qagg.report/1");
    assert_eq!(r["tool"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["seed"], 0);
}

#[test]
fn input_digest_is_sha256_of_the_file() {
    let bytes = std::fs::read(fixture("chain.json")).unwrap();
    let r = report(&["mincut", "--input", &path("chain.json")]);
    assert_eq!(r["input"]["sha256"], format!("{:x}", Sha256::digest(&bytes)));
}

#[test]
fn flow_on_chain_costs_4000_milli() {
    let r = report(&["flow", "--input", &path("chain.json"), "--target", "2"]);
    assert_eq!(r["result"]["total_cost"], 4000);
    assert_eq!(r["result"]["net_flow"], 2);
    assert_eq!(r["params"]["target"], 2);
    let text = qagg(&["flow", "--input", &path("chain.json"), "--target", "2", "--format", "text"]);
    assert!(String::from_utf8(text.stdout).unwrap().contains("total_cost 4.000"));
}

#[test]
fn maxflow_and_price_scan() {
    let r = report(&["maxflow", "--input", &path("diamond.json")]);
    assert_eq!(r["result"]["net_flow"], 2);
    assert_eq!(r["result"]["total_cost"], 6000);
    let scan = report(&["price-scan", "--input", &path("diamond.json")]);
    let curve = scan["result"]["curve"].as_array().unwrap();
    assert_eq!(curve.len(), 3);
    assert_eq!(curve[1]["cost"], 2000);
    assert_eq!(curve[2]["unit_price"], "3000");
    assert_eq!(scan["result"]["best"]["F"], 1);
}

#[test]
fn noiseless_simulate_on_diamond() {
    let r = report(&["simulate", "--input", &path("diamond.json"), "--noise", "0", "--trials", "1"]);
    let res = &r["result"];
    assert_eq!(res["all_pass"], true);
    assert_eq!(res["pair_count"], 2);
    assert_eq!(res["estimate"]["all_pass"], 1);
    assert_eq!(res["exact"]["distance"], "0");
}

#[test]
fn flow_plan_simulate_compose() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("diamond.sched");
    let sched_s = sched.to_string_lossy().into_owned();
    let flow = report(&["flow", "--input", &path("diamond.json")]);
    let out = qagg(&["plan", "--input", &path("diamond.json"), "--format", "text", "--output", &sched_s]);
    assert!(out.status.success());
    let from_file = report(&["simulate", "--input", &path("diamond.json"), "--schedule", &sched_s, "--trials", "50"]);
    assert_eq!(from_file["result"]["pair_count"], flow["result"]["net_flow"]);
    let standalone = report(&["simulate", "--input", &sched_s, "--trials", "50"]);
    assert_eq!(standalone["result"]["pair_count"], flow["result"]["net_flow"]);
    let planned = report(&["simulate", "--input", &path("diamond.json"), "--trials", "50"]);
    assert_eq!(planned["result"]["pair_count"], flow["result"]["net_flow"]);
    assert_eq!(planned["result"]["flow"]["net_flow"], flow["result"]["net_flow"]);
}

#[test]
fn simulate_reports_the_error_bound() {
    let r = report(&[
        "simulate",
        "--input",
        &path("diamond.json"),
        "--noise-p",
        "1/4",
        "--delta-default",
        "0.01",
        "--trials",
        "200",
    ]);
    let res = &r["result"];
    assert_eq!(res["delta"], "1/25");
    assert_eq!(res["epsilon_exact"], true);
    assert_eq!(res["exact"]["bound_holds"], true);
    assert_eq!(r["params"]["noise_p"], "1/4");
}

#[test]
fn concat_report() {
    let r = report(&["concat", "--input", &path("hierarchical.json")]);
    let res = &r["result"];
    assert_eq!(res["Theta"], 3);
    assert_eq!(res["level"], 1);
    assert_eq!(res["cost"], 30000);
    assert_eq!(res["total_lower_cost"], 30000);
    assert_eq!(res["delta"], "3/1000");
}

#[test]
fn rate_report() {
    let r = report(&["rate", "--input", &path("channels.json")]);
    assert!((r["result"]["rate"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(r["result"]["rate"], r["result"]["private_rate"]);
}

#[test]
fn dot_output_labels_flows() {
    let out = qagg(&["flow", "--input", &path("chain.json"), "--target", "2", "--format", "dot"]);
    let dot = String::from_utf8(out.stdout).unwrap();
    assert!(dot.contains("graph qagg {"));
    assert!(dot.contains("\"s\" -- \"r\" [label=\"2/3 @ 1.000\""));
}

#[test]
fn format_defaults_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_qagg"))
        .args(["mincut", "--input", &path("single_edge.json")])
        .env("QAGG_FORMAT", "text")
        .output()
        .unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("C 5\n"));
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.json");
    let args = ["plan", "--input", &path("diamond.json")];
    let stdout = qagg(&args).stdout;
    let out = qagg(&[&args[..], &["--output", &file.to_string_lossy()]].concat());
    assert!(out.status.success() && out.stdout.is_empty());
    assert_eq!(std::fs::read(&file).unwrap(), stdout);
}

#[test]
fn seeds_are_recorded_and_matter() {
    let base = ["simulate", "--input", &path("diamond.json"), "--noise-p", "0.3", "--trials", "300"];
    let a = report(&[&base[..], &["--seed", "1"]].concat());
    let b = report(&[&base[..], &["--seed", "2"]].concat());
    assert_eq!(a["seed"], 1);
    assert_ne!(a["result"]["estimate"], b["result"]["estimate"]);
}

#[test]
fn exit_codes() {
    let (code, err) = error(&["flow", "--input", &path("chain.json"), "--target", "3"]);
    assert_eq!((code, err["error"]["kind"].as_str()), (4, Some("infeasible")));
    let (code, _) = error(&["flow", "--input", &path("chain.json"), "--target", "-1"]);
    assert_eq!(code, 4);
    let (code, err) = error(&["mincut", "--input", &path("bad_unknown_field.json")]);
    assert_eq!((code, err["error"]["kind"].as_str()), (3, Some("validation")));
    let (code, _) = error(&["flow", "--input", &path("hierarchical.json")]);
    assert_eq!(code, 3);
    let (code, _) = error(&["concat", "--input", &path("threshold.json")]);
    assert_eq!(code, 3);
    let (code, _) = error(&["concat", "--input", &path("hierarchical.json"), "--target", "4"]);
    assert_eq!(code, 4);
    let (code, err) = error(&["mincut", "--input", &path("missing.json")]);
    assert_eq!((code, err["error"]["kind"].as_str()), (1, Some("io")));
    let (code, err) = error(&["mincut"]);
    assert_eq!((code, err["error"]["kind"].as_str()), (2, Some("usage")));
    let (code, _) = error(&["mincut", "--input", &path("chain.json"), "--trials", "5"]);
    assert_eq!(code, 2);
    let (code, _) = error(&["flow", "--input", &path("chain.json"), "--format", "svg"]);
    assert_eq!(code, 2);
}

#[test]
fn schedule_only_simulate_cannot_draw() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("s.sched");
    let plan = report(&["plan", "--input", &path("chain.json")]);
    std::fs::write(&sched, plan["result"]["schedule"]["text"].as_str().unwrap()).unwrap();
    let (code, _) = error(&["simulate", "--input", &sched.to_string_lossy(), "--format", "dot"]);
    assert_eq!(code, 2);
}
