//! Suite runner, report round trips and the command line.

use std::path::Path;
use std::process::Command;

use ergoseq::harness::config::SuiteConfig;
use ergoseq::harness::report::sha256_hex;
use ergoseq::harness::{run, run_single, FullReport, SuiteKind};

fn ergoseq(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ergoseq")).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn small(suite: SuiteKind) -> SuiteConfig {
    SuiteConfig { suite, seed: 11, trials: 6, dim: 6, horizon: Some(256), ..SuiteConfig::default() }
}

#[test]
fn reports_are_consistent() {
    for suite in SuiteKind::INDIVIDUAL {
        let mut cfg = small(suite);
        if suite == SuiteKind::Counterexample {
            cfg.horizon = Some(1 << 12);
        }
        let (report, _) = run_single(&cfg, suite).unwrap();
        assert_eq!(report.aggregate.pass + report.aggregate.fail, report.trials);
        assert_eq!(report.failures.is_empty(), report.aggregate.fail == 0);
        assert_eq!(report.records.len(), report.trials);
        let expected = if suite == SuiteKind::Counterexample { 1 } else { 6 };
        assert_eq!(report.trials, expected);
    }
}

#[test]
fn failure_artifacts_replay_exactly() {
    // At a short horizon the raw averages of random operators are far from
    // their limit, so this configuration is guaranteed to produce failures.
    let cfg = SuiteConfig { horizon: Some(64), ..small(SuiteKind::Convergence) };
    let (report, _) = run(&cfg).unwrap();
    assert!(report.aggregate.fail > 0);
    let text = report.to_json().unwrap();
    let back: FullReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    for artifact in &back.failures {
        assert!(!artifact.record.pass);
        assert_eq!(artifact.replay(), artifact.record);
        assert!(artifact.reproduces());
    }
}

#[test]
fn reports_ignore_thread_count() {
    let cfg = SuiteConfig { trials: 12, ..small(SuiteKind::MaximalIneq) };
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| run(&cfg).unwrap().0.to_json().unwrap());
    let b = wide.install(|| run(&cfg).unwrap().0.to_json().unwrap());
    assert_eq!(sha256_hex(a.as_bytes()), sha256_hex(b.as_bytes()));
}

#[test]
fn identity_flag_reproduces_unit_ratio() {
    let cfg = SuiteConfig {
        trials: 1,
        identity_operator: true,
        p_values: vec![1.0],
        alpha_values: vec![0.5],
        ..small(SuiteKind::MaximalIneq)
    };
    let (report, _) = run_single(&cfg, SuiteKind::MaximalIneq).unwrap();
    assert!(report.all_pass());
    assert_eq!(report.aggregate.max_ratio, Some(0.25));
}

#[test]
fn suite_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let out = out.to_str().unwrap();
    let (code, stdout, _) = ergoseq(&["suite", "maximal_ineq", "--trials", "5", "--dim", "6", "--out", out]);
    assert_eq!(code, 0, "{stdout}");
    let report: FullReport = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report.aggregate.pass, 5);
    assert_eq!(report.schema_version, ergoseq::harness::SCHEMA_VERSION);

    let (code, _, stderr) = ergoseq(&["suite", "convergence", "--trials", "2", "--horizon", "64"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("FAIL convergence"));

    assert_eq!(ergoseq(&["suite", "bogus"]).0, 2);
    assert_eq!(ergoseq(&["suite", "fatou", "--trials", "0"]).0, 2);
    assert_eq!(ergoseq(&["suite", "fatou", "--p", "1,x"]).0, 2);
    assert_eq!(ergoseq(&["frobnicate"]).0, 2);
    assert_eq!(ergoseq(&["--help"]).0, 0);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    let out = dir.path().join("r.json");
    std::fs::write(&conf, format!("# small run\nseed = 5\ntrials = 3\ndim = 4\nout = {}\n", out.display())).unwrap();
    let (code, _, stderr) = ergoseq(&["suite", "fatou", "--config", conf.to_str().unwrap(), "--seed", "6"]);
    assert_eq!(code, 0, "{stderr}");
    let report: FullReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.config.seed, 6);
    assert_eq!(report.config.trials, 3);
    assert_eq!(report.config.dim, 4);

    std::fs::write(&conf, "colour = blue\n").unwrap();
    assert_eq!(ergoseq(&["suite", "fatou", "--config", conf.to_str().unwrap()]).0, 2);
}

fn read_csv(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn traces_are_csv() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let t = trace.to_str().unwrap();
    let (code, _, _) = ergoseq(&["average", "--op", "perm:2,1", "--x", "1,0", "--horizon", "64", "--trace", t]);
    assert_eq!(code, 0);
    let lines = read_csv(&trace);
    assert_eq!(lines[0], "n,residual,coord_index,coord_value");
    assert!(lines[1].starts_with("2,"));

    let (code, stdout, _) = ergoseq(&["demo", "counterexample", "--horizon", "4096", "--trace", t]);
    assert_eq!(code, 0, "{stdout}");
    let lines = read_csv(&trace);
    assert_eq!(lines.len(), 1 + 12);
    assert!(lines.last().unwrap().starts_with("4096,"));
}

#[test]
fn other_command_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.txt");
    let bad = dir.path().join("bad.txt");
    std::fs::write(&good, "0.5 -0.5\n-0.25 0.25\n").unwrap();
    std::fs::write(&bad, "1 1\n0 0\n").unwrap();
    assert_eq!(ergoseq(&["certify", "--matrix", good.to_str().unwrap()]).0, 0);
    assert_eq!(ergoseq(&["certify", "--matrix", bad.to_str().unwrap()]).0, 1);
    assert_eq!(ergoseq(&["certify", "--matrix", "/nonexistent/m.txt"]).0, 2);
    assert_eq!(ergoseq(&["certify"]).0, 2);

    assert_eq!(ergoseq(&["average", "--op", "identity:2", "--x", "1,2", "--horizon", "16"]).0, 0);
    assert_eq!(ergoseq(&["average", "--op", "shift-left", "--x", "ones", "--horizon", "16"]).0, 0);
    assert_eq!(ergoseq(&["average", "--op", "random:4:1", "--x", "1,0,0,0", "--horizon", "16"]).0, 1);
    assert_eq!(ergoseq(&["average", "--op", "nope", "--x", "1", "--horizon", "16"]).0, 2);
    assert_eq!(ergoseq(&["average", "--op", "identity:2", "--x", "1,2,3", "--horizon", "16"]).0, 2);

    assert_eq!(ergoseq(&["demo", "counterexample", "--horizon", "512"]).0, 2);
    assert_eq!(ergoseq(&["demo", "counterexample", "--horizon", "1024", "--c0-contrast"]).0, 1);
}
