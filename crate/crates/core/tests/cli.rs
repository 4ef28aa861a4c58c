use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moral-mech"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn catalog_lists_entries() {
    let o = run(&["catalog", "list", "--format", "table"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("scaled-second-price"));
}

#[test]
fn violating_grid_exits_one_with_csv() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.json");
    let o = run(&["catalog", "build", "non-monotone", "--alpha", "1/2", "--out", path(&grid)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ok = run(&["check-moral", "--grid", path(&grid), "--alpha", "1/2"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["moral"], true);
    let bad = run(&["check-moral", "--grid", path(&grid), "--alpha", "1/4", "--format", "csv"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = stdout(&bad);
    assert!(text.starts_with("instance,deviator,lie,gain,loss\n"), "{text}");
    assert!(text.contains("\"(21/20, 1/10)\""), "{text}");
}

#[test]
fn malformed_rational_in_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(&cfg, r#"{"command": "search", "mode": "moral", "alpha": "1/0", "dist": ["uniform:3"], "players": 2}"#).unwrap();
    let o = run(&["run", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(err["error"], "parse");
    assert!(err["message"].as_str().unwrap().contains("at alpha"), "{err}");
}

#[test]
fn config_runs_the_same_search() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(&cfg, r#"{"command": "search", "mode": "truthful", "dist": ["uniform:3"], "players": 2}"#).unwrap();
    let via_config = run(&["run", "--config", path(&cfg)]);
    let direct = run(&["search", "--mode", "truthful", "--dist", "uniform:3", "--players", "2"]);
    assert_eq!(via_config.status.code(), Some(0), "{}", stderr(&via_config));
    assert_eq!(via_config.stdout, direct.stdout);
    assert_eq!(json(&direct)["result"]["best_revenue"], "5/9");
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(run(&["search"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.json");
    std::fs::write(&grid, r#"{"values": [["0", "1"]], "prices": [], "extra": 1}"#).unwrap();
    let o = run(&["check-moral", "--grid", path(&grid)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("\"parse\""));
    let o = run(&["check-moral", "--grid", path(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("\"io\""));
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let args = ["gap-search", "--samples", "40", "--seed", "3"];
    let a = run(&[&args[..], &["--threads", "1"]].concat());
    let b = run(&[&args[..], &["--threads", "2"]].concat());
    let c = run(&[&args[..], &["--threads", "1"]].concat());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn myerson_lift_and_revenue_agree() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("ssp.json");
    let o = run(&["catalog", "build", "scaled-second-price", "--c", "1/2", "--out", path(&grid)]);
    assert_eq!(o.status.code(), Some(0));
    let lifted = run(&["lift", "--grid", path(&grid), "--dist", "uniform:3", "--trace"]);
    assert_eq!(lifted.status.code(), Some(0), "{}", stderr(&lifted));
    let doc = json(&lifted);
    assert_eq!(doc["final_revenue"], "1/2");
    assert!(!doc["trace"]["steps"].as_array().unwrap().is_empty());

    let out = dir.path().join("lifted.json");
    std::fs::write(&out, serde_json::to_string(&doc["grid"]).unwrap()).unwrap();
    let rev = run(&["revenue", "--grid", path(&out), "--dist", "uniform:3", "--players", "2"]);
    assert_eq!(json(&rev)["revenue"], "1/2");
    assert_eq!(json(&rev)["truthful"], true);

    let my = run(&["myerson", "--dist", "uniform:3", "--players", "2"]);
    assert_eq!(json(&my)["revenue"], "5/9");
}

#[test]
fn validate_h_reports_failures_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let joint = dir.path().join("h.json");
    std::fs::write(
        &joint,
        r#"{"n": 2, "atoms": [{"profile": ["1", "1"], "weight": "1/2"}, {"profile": ["3", "1"], "weight": "1/2"}]}"#,
    )
    .unwrap();
    let o = run(&["validate-h", "--joint", path(&joint), "--alpha", "1", "--eps", "1/10", "--delta", "1/10", "--gain"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let doc = json(&o);
    assert_eq!(doc["optimal_truthful_revenue"], "2");
    assert_eq!(doc["moralize_gain"]["verdict"]["verdict"], "fails");
}

#[test]
fn reproduce_single_criterion() {
    let o = run(&["reproduce-paper", "--quick", "--only", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));
    assert_eq!(run(&["reproduce-paper", "--only", "11"]).status.code(), Some(2));
}
