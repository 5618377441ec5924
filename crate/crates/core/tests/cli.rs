use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bestm_sched::cli::{load_scenario, SIMULATE_HEADER};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn bestm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bestm")).args(args).env_remove("BESTM_SEED").output().unwrap()
}

fn rows(out: &Output) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    r.records().map(|x| x.unwrap()).collect()
}

fn column(out: &Output, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|x| x.unwrap()[idx].to_string()).collect()
}

#[test]
fn golden_scenario_has_six_cells() {
    let s = load_scenario(&scenario("hetnet_golden.json")).unwrap();
    assert_eq!(s.cells.len(), 6);
    assert_eq!(s.cells.iter().filter(|c| c.tier == bestm_sched::channel::Tier::Pico).count(), 4);
}

#[test]
fn single_user_rate_exact_is_one_row() {
    let out = bestm(&["rate-exact", "--scenario", scenario("single_user.json").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(column(&out, "user_rate"), column(&out, "sum_rate"));
}

#[test]
fn simulate_tracks_rate_exact_within_one_percent() {
    let s = scenario("hetnet_golden.json");
    let s = s.to_str().unwrap();
    let sim = bestm(&["simulate", "--scenario", s, "--policy", "cdf", "--M", "4", "--drops", "4", "--slots", "1000"]);
    let exact = bestm(&["rate-exact", "--scenario", s, "--M", "4"]);
    assert!(sim.status.success() && exact.status.success());
    let a: f64 = column(&sim, "sum_rate")[0].parse().unwrap();
    let b: f64 = column(&exact, "sum_rate")[0].parse().unwrap();
    assert!((a - b).abs() / b <= 0.01, "simulated {a}, exact {b}");
}

#[test]
fn validate_golden_passes() {
    let out = bestm(&["validate", "--scenario", scenario("hetnet_golden.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let status = column(&out, "status");
    assert!(!status.is_empty());
    assert!(status.iter().all(|s| s == "PASS"));
}

#[test]
fn header_is_fixed_and_numbers_have_twelve_digits() {
    let out = bestm(&[
        "simulate",
        "--scenario",
        scenario("single_user.json").to_str().unwrap(),
        "--M",
        "3",
        "--drops",
        "2",
        "--slots",
        "50",
    ]);
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), SIMULATE_HEADER.join(","));
    for field in column(&out, "sum_rate").iter().chain(&column(&out, "user_rate")) {
        let digits = field.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
        assert!(digits.trim_start_matches('0').len() <= 12, "{field}");
    }
}

#[test]
fn seed_precedence_and_reproducibility() {
    let s = scenario("hetnet_random.json");
    let s = s.to_str().unwrap();
    let args = ["simulate", "--scenario", s, "--M", "2", "--drops", "3", "--slots", "100"];
    let run_env = |seed: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_bestm"));
        c.args(args).args(extra).env_remove("BESTM_SEED");
        if let Some(v) = seed {
            c.env("BESTM_SEED", v);
        }
        c.output().unwrap().stdout
    };
    let env5 = run_env(Some("5"), &[]);
    assert_eq!(env5, run_env(None, &["--seed", "5"]));
    assert_eq!(run_env(Some("9"), &["--seed", "5"]), env5, "flag must beat the environment");
    assert_ne!(run_env(None, &[]), env5, "scenario seed 7 differs from 5");
    assert_eq!(run_env(None, &["--seed", "5", "--threads", "1"]), run_env(None, &["--seed", "5", "--threads", "3"]));
}

#[test]
fn out_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.csv");
    let status = bestm(&[
        "plan-feedback",
        "--scenario",
        scenario("hetnet_golden.json").to_str().unwrap(),
        "--eta",
        "0.9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("eta,num_users,num_rb,m_exact,m_asymptotic"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("plan.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "plan-feedback");
    assert_eq!(manifest["overrides"]["eta"], 0.9);
}

#[test]
fn invalid_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"cells\": [{\"tier\": \"macro\", \"position_m\": [0, 0x]}]}").unwrap();
    let out = bestm(&["rate-exact", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let out = bestm(&["rate-exact", "--scenario", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("cells") && msg.contains("users"), "{msg}");

    let single = scenario("single_user.json");
    let out = bestm(&["rate-exact", "--scenario", single.to_str().unwrap(), "--M", "17"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bestm(&["simulate", "--scenario", single.to_str().unwrap(), "--policy", "fastest"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bestm(&["rate-exact"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bestm(&[
        "rate-exact",
        "--scenario",
        scenario("single_user.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
