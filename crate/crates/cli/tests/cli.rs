use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpverif")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_p4_holds() {
    let o = run(&["check", "--corpus", "p4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("holds"));
}

#[test]
fn check_rejects_replicable_protocols() {
    assert_eq!(run(&["check", "--corpus", "yahalom"]).status.code(), Some(2));
}

#[test]
fn explore_broken_variant_prints_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    let o = run(&["explore", "--corpus", "wmf-broken", "--sessions", "1", "--trace", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("violated"));
    let lines = std::fs::read_to_string(&path).unwrap();
    assert!(!lines.trim().is_empty());
    for l in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        for k in ["proc", "action", "bindingDelta", "chanDelta"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
    }
}

#[test]
fn explore_hitting_the_state_limit_exits_3() {
    let o = run(&["explore", "--corpus", "yahalom", "--sessions", "2", "--max-states", "50"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).starts_with("resource-limit"));
}

#[test]
fn reduced_dot_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.dot");
    let o = run(&["tg", "--corpus", "p1", "--reduce", "--dot", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        include_str!("../../core/tests/golden/p1_reduced.dot")
    );
}

#[test]
fn svg_has_one_group_per_node() {
    let o = run(&["tg", "--corpus", "p3", "--reduce", "--svg", "-"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("class=\"node\"").count(), 10);
}

#[test]
fn facts_report_lists_rounds() {
    let o = run(&["tg", "--corpus", "p3", "--facts"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["fullNodes"], 27);
    assert_eq!(v["reducedNodes"].as_array().unwrap().len(), 10);
    assert_eq!(v["rounds"][0].as_array().unwrap().len(), 8);
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cp");
    std::fs::write(&path, "protocol bad;\nprocess P(A) {\n  0: send -> 1;\n}\n").unwrap();
    let o = run(&["parse", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.cp:"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["check", "--corpus", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["explore", "--corpus", "p1", "--sessions", "0"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["check"]).status.code(), Some(2));
}

#[test]
fn parse_prints_canonical_text() {
    let a = run(&["corpus", "p2"]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p2.cp");
    std::fs::write(&path, &a.stdout).unwrap();
    let b = run(&["parse", path.to_str().unwrap()]);
    assert_eq!(b.status.code(), Some(0));
    let c = run(&["parse", "--corpus", "p2"]);
    assert_eq!(b.stdout, c.stdout);
}

#[test]
fn corpus_dir_override() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = stdout(&run(&["corpus", "p1"]));
    std::fs::write(dir.path().join("p1.cp"), p1.replace("protocol p1", "protocol renamed")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cpverif"))
        .args(["parse", "--corpus", "p1", "--json"])
        .env("CPVERIF_CORPUS_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["protocol"], "renamed");
}

#[test]
fn json_output_is_repeatable() {
    let args = ["explore", "--corpus", "p4", "--json", "--seed", "9"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
