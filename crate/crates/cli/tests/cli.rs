use std::process::{Command, Output};

use decpomdp::bench::build_named;
use decpomdp::model::serialize_model;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decpomdp"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lists_benchmarks() {
    let o = run(&["list-benchmarks"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in [
        "box-pushing",
        "dec-tiger",
        "firefighting",
        "firefighting-modified",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(
        run(&["solve", "--problem", "dec-tiger", "--width", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["validate", "--problem", "no-such-problem"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(&[
            "validate",
            "--problem",
            "dec-tiger",
            "--problem-param",
            "houses=3"
        ])
        .status
        .code(),
        Some(2)
    );
    let o = run(&[
        "solve",
        "--problem",
        "box-pushing",
        "--algorithm",
        "exact",
        "--horizon",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn solve_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("policy.json");
    let policy = policy.to_str().unwrap();
    let o = run(&[
        "solve",
        "--problem",
        "dec-tiger",
        "--algorithm",
        "exact",
        "--horizon",
        "2",
        "--out",
        policy,
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("value=-4"), "{}", stdout(&o));
    let o = run(&[
        "evaluate",
        "--problem",
        "dec-tiger",
        "--policy",
        policy,
        "--episodes",
        "1000",
    ]);
    assert!(o.status.success());
    assert!(
        stdout(&o).starts_with("exact=-4 simulated=-4"),
        "{}",
        stdout(&o)
    );
    let o = run(&["evaluate", "--problem", "firefighting", "--policy", policy]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn mdp_bound_and_validate_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiger.dpomdp");
    std::fs::write(&path, serialize_model(&build_named("dec-tiger").unwrap())).unwrap();
    let problem = format!("file:{}", path.display());
    let o = run(&["validate", "--problem", &problem]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("agents=2 states=2 joint_actions=9 joint_observations=4"));
    let o = run(&["mdp-bound", "--problem", &problem, "--horizon", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 20.0);
}

#[test]
fn experiment_csv() {
    let o = run(&[
        "experiment",
        "--problem",
        "dec-tiger",
        "--algorithm",
        "mbdp",
        "--algorithm",
        "psmbdp",
        "--horizon",
        "3",
        "--width",
        "1,2",
        "--runs",
        "2",
        "--output",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "algorithm,W,H,runs,AEV,sigma,mean_time_s");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("mbdp,1,3,2,"));
    assert!(lines[4].starts_with("psmbdp,2,3,2,"));
}
