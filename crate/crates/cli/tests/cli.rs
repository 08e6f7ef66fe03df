use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn coarse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coarse"))
        .args(args)
        .output()
        .unwrap()
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut all = vec!["--report", "json"];
    all.extend_from_slice(args);
    let out = coarse(&all);
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    });
    (out.status.code().unwrap(), v)
}

#[test]
fn matching_run_exits_zero() {
    let (code, v) = json(&["run", "reflection"]);
    assert_eq!(code, 0);
    assert_eq!(v["command"], "run");
    assert_eq!(v["summary"]["mismatched"], 0);
    assert!(v.get("timing").is_none());
}

#[test]
fn mismatch_exits_one_and_points_at_first_failure() {
    let (code, v) = json(&["run", &data("mismatch.toml")]);
    assert_eq!(code, 1);
    assert_eq!(v["summary"]["first_mismatch"], 0);
    assert_eq!(v["summary"]["outcomes"], 2);
    assert_eq!(v["outcomes"][0]["mismatch"], "expected count 3, got 2");
}

#[test]
fn fail_fast_stops_after_first_mismatch() {
    let (code, v) = json(&["--fail-fast", "run", &data("mismatch.toml")]);
    assert_eq!(code, 1);
    assert_eq!(v["summary"]["outcomes"], 1);
    assert_eq!(v["summary"]["stopped_early"], true);
}

#[test]
fn empty_scenario_passes_with_no_outcomes() {
    let (code, v) = json(&["run", &data("empty.toml")]);
    assert_eq!(code, 0);
    assert_eq!(v["outcomes"].as_array().unwrap().len(), 0);
}

#[test]
fn errors_exit_two_with_message() {
    for (args, needle) in [
        (
            vec!["run", "no_such_scenario"],
            "no such file or bundled scenario",
        ),
        (
            vec!["run", &data("unresolved.toml")],
            "unresolved bundle `missing`",
        ),
        (
            vec!["run", &data("future_schema.toml")],
            "unsupported schema version 2",
        ),
        (vec!["run", &data("malformed.toml")], "malformed.toml"),
        (
            vec!["--tol", "eq_tol=0.5", "run", "reflection"],
            "out of range",
        ),
        (
            vec!["--tol", "eq_tol=0", "run", "reflection"],
            "out of range",
        ),
        (
            vec!["--tol", "bogus=1e-3", "run", "reflection"],
            "unresolved tolerance `bogus`",
        ),
        (
            vec!["classify", "reflection", "nope"],
            "unresolved list `nope`",
        ),
    ] {
        let out = coarse(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(
            err.starts_with("error: ") && err.contains(needle),
            "{args:?}: {err}"
        );
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn overrides_win_over_scenario_settings() {
    let (_, v) = json(&["run", &data("tolerances.toml")]);
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["config"]["samples"], 16);
    assert_eq!(v["config"]["tolerances"]["eq_tol"], 1e-8);
    assert_eq!(v["config"]["tolerances"]["fd_tol"], 1e-6);
    let (_, v) = json(&[
        "--seed",
        "3",
        "--samples",
        "8",
        "--tol",
        "eq_tol=1e-7",
        "run",
        &data("tolerances.toml"),
    ]);
    assert_eq!(v["config"]["seed"], 3);
    assert_eq!(v["config"]["samples"], 8);
    assert_eq!(v["config"]["tolerances"]["eq_tol"], 1e-7);
}

#[test]
fn output_is_byte_identical_across_runs() {
    for fmt in ["text", "json"] {
        let a = coarse(&["--report", fmt, "run", "bz2_circle"]);
        let b = coarse(&["--report", fmt, "run", "bz2_circle"]);
        assert_eq!(a.stdout, b.stdout, "{fmt}");
    }
}

#[test]
fn timing_is_opt_in() {
    let (_, v) = json(&["--timing", "run", &data("empty.toml")]);
    assert!(v["timing"]["wall_clock_ms"].as_f64().unwrap() >= 0.0);
    let text = coarse(&["--timing", "run", &data("empty.toml")]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("wall clock"));
}

#[test]
fn classify_reports_three_partitions() {
    let (code, v) = json(&["classify", "reflection", "triple"]);
    assert_eq!(code, 0);
    let ops: Vec<&str> = v["outcomes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["op"].as_str().unwrap())
        .collect();
    assert_eq!(
        &ops[..3],
        [
            "isomorphism_classes",
            "discretization_classes",
            "coarse_classes"
        ]
    );
    assert_eq!(v["outcomes"][2]["count"], 1);
    assert!(v["outcomes"][0]["expected"].is_null());
}

#[test]
fn sheaf_subcommands() {
    let (code, v) = json(&["sheaf", "sheafify", "bz2_circle"]);
    assert_eq!(code, 0);
    let s = v["outcomes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|o| o["op"] == "sheafify" && o["subject"] == "pi0 at S")
        .unwrap();
    assert_eq!(s["count"], 1);
    let (_, v) = json(&["sheaf", "kappa", "omega_collapse"]);
    assert_eq!(v["outcomes"].as_array().unwrap().len(), 4);
    let (_, v) = json(&["sheaf", "concreteness", "omega_collapse"]);
    assert_eq!(v["outcomes"][0]["verdict"]["verdict"], "pass");
    assert_eq!(v["outcomes"][1]["verdict"]["verdict"], "refuted");
    let (code, v) = json(&["sheaf", "adjunction-check", "adjunction_random"]);
    assert_eq!(code, 0);
    assert_eq!(v["outcomes"][0]["count"], 100);
}

#[test]
fn scenarios_lists_bundled_names() {
    let out = coarse(&["scenarios"]);
    assert_eq!(out.status.code(), Some(0));
    let names = String::from_utf8_lossy(&out.stdout);
    for n in coarse_cli::BUNDLED.iter().map(|(n, _)| *n) {
        assert!(names.lines().any(|l| l.starts_with(n)), "{n}");
    }
}
