//! End-to-end tests of the `normengine` binary: subcommands, formats, exit
//! codes and the golden reports.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_normengine"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("fixtures/{name}"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/data/{name}"))
}

fn stdout_of(out: &Output) -> &str {
    std::str::from_utf8(&out.stdout).expect("utf-8 stdout")
}

fn stderr_of(out: &Output) -> &str {
    std::str::from_utf8(&out.stderr).expect("utf-8 stderr")
}

#[test]
fn run_matches_the_golden_reports() {
    for name in [
        "rear_end",
        "brake_failure",
        "ice_skid",
        "two_anomalies",
        "stop_then_bump",
        "tailgate",
    ] {
        let out = bin()
            .args(["run", "--facts"])
            .arg(fixture(&format!("{name}.nfx")))
            .args(["--format", "json"])
            .output()
            .expect("binary runs");
        assert!(out.status.success(), "{name}: {}", stderr_of(&out));
        let golden =
            std::fs::read_to_string(fixture(&format!("{name}.expected.json"))).expect("golden");
        assert_eq!(
            stdout_of(&out),
            golden,
            "{name}: report differs from golden"
        );
    }
}

#[test]
fn run_text_mode_prints_the_cause() {
    let out = bin()
        .args(["run", "--facts"])
        .arg(fixture("rear_end.nfx"))
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("cause: A did not stop in a situation in which it had to"));
    assert!(text.contains("minimal state, then agent, then property"));
}

#[test]
fn run_with_trace_and_oracle_verification() {
    let out = bin()
        .args(["run", "--facts"])
        .arg(fixture("rear_end.nfx"))
        .args(["--trace", "--verify-oracle"])
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("oracle check: database is a Reiter extension: true"));
    assert!(text.contains("trace ("));
    assert!(text.contains("@an_form1"));

    // JSON mode embeds the trace and the oracle verdict.
    let out = bin()
        .args(["run", "--facts"])
        .arg(fixture("rear_end.nfx"))
        .args(["--trace", "--verify-oracle", "--format", "json"])
        .output()
        .expect("binary runs");
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out)).expect("valid json");
    assert_eq!(doc["oracle_verified"], serde_json::json!(true));
    assert_eq!(doc["schema_version"], serde_json::json!(1));
    assert!(doc["trace"]["nodes"].as_array().expect("nodes").len() > 10);
}

#[test]
fn exit_codes_partition_outcomes() {
    // 0: success with no anomalies.
    let out = bin()
        .args(["run", "--facts"])
        .arg(fixture("stop_then_bump.nfx"))
        .output()
        .expect("runs");
    assert_eq!(out.status.code(), Some(0));

    // 2: static errors (malformed KB).
    let out = bin()
        .args(["run", "--kb"])
        .arg(data("broken.nkb"))
        .arg("--facts")
        .arg(fixture("rear_end.nfx"))
        .output()
        .expect("runs");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("error"));

    // 3: inconsistent database, reporting the clashing derivations.
    let out = bin()
        .args(["run", "--kb"])
        .arg(data("inconsistent.nkb"))
        .arg("--facts")
        .arg(data("inconsistent_facts.nfx"))
        .output()
        .expect("runs");
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_of(&out);
    assert!(err.contains("inconsistent database"), "{err}");
    assert!(err.contains("i1") && err.contains("i2"), "{err}");
}

#[test]
fn instance_cap_env_var_is_honored() {
    let out = bin()
        .args(["run", "--facts"])
        .arg(fixture("rear_end.nfx"))
        .env("NORMENGINE_INSTANCE_CAP", "10")
        .output()
        .expect("runs");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("instance cap of 10"));

    // The flag wins over the environment.
    let out = bin()
        .args(["run", "--facts"])
        .arg(fixture("rear_end.nfx"))
        .args(["--instance-cap", "100000"])
        .env("NORMENGINE_INSTANCE_CAP", "10")
        .output()
        .expect("runs");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn stratify_lists_strata_in_order() {
    let out = bin().arg("stratify").output().expect("runs");
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    let bump_line = text
        .lines()
        .position(|l| l.ends_with(" bump") || l.contains(": bump"))
        .expect("bump line");
    let follow_line = text
        .lines()
        .position(|l| l.contains(": follow"))
        .expect("follow line");
    assert!(bump_line < follow_line);
    assert!(text.contains("L2.1: must(stop)"));
    assert!(text.contains("available"));

    let out = bin()
        .args(["stratify", "--format", "json"])
        .output()
        .expect("runs");
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out)).expect("valid json");
    assert!(doc["strata"].as_array().expect("strata").len() > 10);
    assert_eq!(doc["diagnostics"].as_array().map(Vec::len), Some(0));
}

#[test]
fn parse_prints_the_canonical_form() {
    let kb_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/kb/crash.nkb");
    let out = bin().arg("parse").arg(&kb_path).output().expect("runs");
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.starts_with("% declarations\n"));
    assert!(text.contains("@bump_not_stop holds(combine(bump, V), W, T) => -holds(stop, W, T)."));
    // Unused declarations surface as warnings on stderr, not errors.
    assert!(stderr_of(&out).contains("never used"));

    let out = bin()
        .arg("parse")
        .arg(fixture("rear_end.nfx"))
        .output()
        .expect("runs");
    assert!(out.status.success());
    assert_eq!(stdout_of(&out).lines().count(), 9);

    let out = bin()
        .arg("parse")
        .arg(data("broken.nkb"))
        .output()
        .expect("runs");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explain_renders_derivation_trees() {
    let out = bin()
        .args(["explain", "--facts"])
        .arg(fixture("rear_end.nfx"))
        .arg("must(stop, X, T)")
        .output()
        .expect("runs");
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.starts_with("must(stop, a, 1)"));
    assert!(text.contains("@follow_stop_duty"));
    assert!(text.contains("holds(stop, b_narrator, 1)"));

    let out = bin()
        .args(["explain", "--facts"])
        .arg(fixture("rear_end.nfx"))
        .arg("holds(stop, zzz, 9)")
        .output()
        .expect("runs");
    assert!(out.status.success());
    assert!(stdout_of(&out).contains("not derived"));
}

#[test]
fn stratify_rejects_a_strict_cycle_with_a_diagnostic() {
    let out = bin()
        .args(["stratify", "--kb"])
        .arg(data("strict_cycle.nkb"))
        .output()
        .expect("runs");
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("cyclic-strict-dependency"), "{err}");
    assert!(err.contains("d1"), "{err}");
}

#[test]
fn explain_rejects_malformed_patterns() {
    let out = bin()
        .args(["explain", "--facts"])
        .arg(fixture("rear_end.nfx"))
        .arg("must(stop, X")
        .output()
        .expect("runs");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("error"));
}

#[test]
fn oracle_enumerates_extensions_of_a_ground_theory() {
    let out = bin()
        .arg("oracle")
        .arg(data("two_defaults.nkb"))
        .output()
        .expect("runs");
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.starts_with("extensions: 2"), "{text}");
    assert!(text.contains("holds(a, x, 1)"));
    assert!(text.contains("-holds(a, x, 1)"));
}
