use std::path::Path;
use std::process::{Command, Output};

use juliaspec::operator::read_export;

fn juliaspec(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_juliaspec"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn julia_writes_ppm_and_sidecar_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "julia", "--p", "0.7", "--window", "-1.5", "1.5", "-1.5", "1.5", "--res", "96", "64",
        "--iters", "100", "--out", "a.ppm",
    ];
    assert_eq!(juliaspec(&args, dir.path()).status.code(), Some(0));
    let first = std::fs::read(dir.path().join("a.ppm")).unwrap();
    let side: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a.ppm.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["p"], 0.7);
    assert_eq!(side["pixels"], 96 * 64);
    assert!(side["bounded_pixels"].as_u64().unwrap() > 0);
    assert!(first.starts_with(b"P6\n# config {"));

    assert_eq!(juliaspec(&args, dir.path()).status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("a.ppm")).unwrap(), first);
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 2, "temporary files must not remain");
}

#[test]
fn ep_defaults_to_named_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = juliaspec(&["ep", "--p", "0.625", "--res", "32", "32"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("ep.ppm").exists());
    assert!(dir.path().join("ep.ppm.json").exists());
}

#[test]
fn matrix_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = juliaspec(
        &[
            "matrix", "--base", "fib", "--size", "13", "--p", "0.5", "--out", "m.tsv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read(dir.path().join("m.tsv")).unwrap();
    let export = read_export(text.as_slice()).unwrap();
    assert_eq!(export.size, 13);
    assert_eq!(export.p, 0.5);
    assert!(export.entries.contains(&(7, 5, 0.25)));
    assert!(export.entries.contains(&(7, 8, 0.125)));
}

#[test]
fn simulate_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        stdout(&juliaspec(
            &["simulate", "--n", "7", "--samples", "2000", "--seed", seed],
            dir.path(),
        ))
    };
    let a = run("3");
    assert_eq!(a, run("3"));
    assert_ne!(a, run("4"));
    assert!(a.contains("state,exact,empirical"));
    assert!(a.contains("walk,step,state"));
}

#[test]
fn residual_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = juliaspec(&["residual", "--lambda", "1", "0", "--n", "12"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let res = v["report"]["residuals"].as_array().unwrap();
    assert_eq!(res.len(), 12);
    assert_eq!(res[0][0], 2);
    assert_eq!(v["report"]["classification_evidence"]["q_bounded"], true);
    assert_eq!(v["report"]["thresholds"]["horizon"], 4096);
}

#[test]
fn candidates_and_eig_tables() {
    let dir = tempfile::tempdir().unwrap();
    let c = stdout(&juliaspec(&["candidates", "--depth", "3"], dir.path()));
    let rows: Vec<&str> = c.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows[0],
        "re,im,q_bounded,inv_q_bounded,identity_holds,max_abs_q,min_abs_q"
    );
    assert_eq!(rows.len(), 1 + 8);
    let e = stdout(&juliaspec(
        &["eig", "--size", "32", "--res", "64", "64"],
        dir.path(),
    ));
    assert!(e.contains("# exploratory"));
    assert!(e.contains("re,im,escape_iter,member,dist"));
}

#[test]
fn qseq_reports_escape() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&juliaspec(
        &["qseq", "--lambda", "3", "0", "--n", "100000"],
        dir.path(),
    ));
    assert!(out.contains("# escaped at n="));
}

#[test]
fn verify_passes_and_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for base in ["binary", "fib"] {
        let o = juliaspec(&["verify", "--base", base, "--p", "0.7"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    assert_eq!(
        juliaspec(&["row", "--p", "0"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        juliaspec(&["frobnicate"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        juliaspec(&["julia", "--res", "0", "5"], dir.path())
            .status
            .code(),
        Some(2)
    );
}
