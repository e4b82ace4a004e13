use std::path::Path;
use std::process::{Command, Output};

fn adsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adsim")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = adsim(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn graph_check_and_ate_report() {
    assert!(ok(&["graph", "check"]).starts_with("graph ok: 13 variables"));
    let ate = ok(&["report", "ate"]);
    for v in ["-1.95", "-2.48", "-3.03", "-3.2", "-2.01", "-1.29", "-2.64"] {
        assert!(ate.contains(v), "{v} missing from\n{ate}");
    }
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--n", "400", "--horizon", "3", "--seed", "5", "--epsilon", "1", "--out", path(&sim)]);
    for f in ["observational.csv", "oracle.csv", "cohort.csv", "provenance.json"] {
        assert!(sim.join(f).exists(), "{f}");
    }
    let scores = dir.path().join("scores.csv");
    ok(&[
        "estimate",
        "--train",
        path(&sim.join("observational.csv")),
        "--oracle",
        path(&sim.join("oracle.csv")),
        "--estimator",
        "t",
        "--out",
        path(&scores),
    ]);
    let text = std::fs::read_to_string(&scores).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("estimator,action,pehe,ate_error,n,config_hash"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r.starts_with("t,") && r.split(',').nth(4) == Some("400")));
}

#[test]
fn simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["simulate", "--n", "200", "--seed", "9", "--out", path(&a)]);
    let out = Command::new(env!("CARGO_BIN_EXE_adsim"))
        .args(["simulate", "--n", "200", "--seed", "9", "--out", path(&b)])
        .env("ADSIM_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    for f in ["observational.csv", "oracle.csv", "cohort.csv", "provenance.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn oracle_columns_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--n", "50", "--horizon", "2", "--out", path(&sim)]);
    let oracle = sim.join("oracle.csv");
    let out = adsim(&[
        "estimate",
        "--train",
        path(&oracle),
        "--oracle",
        path(&oracle),
        "--estimator",
        "s",
        "--out",
        path(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle-only columns"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = adsim(&["simulate", "--gamma", "0.5", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(adsim(&["no-such-command"]).status.code(), Some(1));
    let missing = adsim(&["cohort", "prepare", "--input", "/nonexistent.csv", "--out", path(&dir.path().join("o.csv"))]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_graph = dir.path().join("g.json");
    std::fs::write(&bad_graph, "{\"latent\": \"Z\"").unwrap();
    assert_eq!(adsim(&["graph", "check", "--graph", path(&bad_graph)]).status.code(), Some(1));
}

#[test]
fn prepare_and_fit_reference_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let prepared = dir.path().join("prepared.csv");
    let bank = dir.path().join("bank.json");
    let report = dir.path().join("fit.tsv");
    ok(&["reference", "cohort", "--out", path(&raw)]);
    let summary = ok(&["cohort", "prepare", "--input", path(&raw), "--out", path(&prepared), "--seed", "1"]);
    assert!(summary.starts_with("870 patients"), "{summary}");
    ok(&["fit", "--cohort", path(&prepared), "--out", path(&bank), "--report", path(&report)]);
    let table = std::fs::read_to_string(&report).unwrap();
    assert!(table.contains("ADAS13") && table.contains("Diagnosis"));
    let sim = dir.path().join("sim");
    ok(&["simulate", "--bank", path(&bank), "--n", "100", "--out", path(&sim)]);
}

#[test]
fn tiny_sweep_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"base": {"n_patients": 300, "horizon": 2, "gamma": 2.0, "epsilon": 1.0, "policy": "covariate", "seed": 0},
            "knob": "gamma", "grid": [2.0], "estimators": ["t"], "seeds": [3]}"#,
    )
    .unwrap();
    let run = |out: &Path| {
        ok(&["sweep", "--spec", path(&spec), "--out", path(out)]);
        let text = std::fs::read_to_string(out.join("records.csv")).unwrap();
        text.lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert_eq!(a.len(), 1 + 7);
    assert_eq!(a, b);
    let summary = ok(&["report", "sweep", "--records", path(&dir.path().join("a").join("records.csv"))]);
    assert_eq!(summary.lines().count(), 2);
}
