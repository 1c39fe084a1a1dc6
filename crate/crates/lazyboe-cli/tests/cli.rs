//! End-to-end smoke tests for the `lazyboe` binary: config init, bundle
//! build/analyze/info, planning, benchmarking, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lazyboe"));
    // Single worker keeps these smoke tests deterministic and cheap.
    c.env("LAZYKDP_THREADS", "1");
    c
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "exit {:?} for {args:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Default config shrunk to smoke-test size.
fn write_small_config(path: &Path) {
    run_ok(&["config", "init", "--out", path.to_str().unwrap()]);
    let mut cfg = std::fs::read_to_string(path).unwrap();
    for (from, to) in [
        ("n_edges = 4000", "n_edges = 400"),
        ("p = 500", "p = 30"),
        ("n_problems = 20", "n_problems = 2"),
        (
            "planners = [\"lazyboe\", \"boe\", \"rrt\", \"sst0.5\", \"sst1\", \"sst2\"]",
            "planners = [\"lazyboe\", \"boe\"]\nbudget_iterations = 2000",
        ),
    ] {
        assert!(cfg.contains(from), "missing `{from}` in generated config");
        cfg = cfg.replace(from, to);
    }
    std::fs::write(path, cfg).unwrap();
}

#[test]
fn help_and_version() {
    let out = run_ok(&["--help"]);
    let s = stdout(&out);
    for sub in ["bundle", "plan", "bench", "config"] {
        assert!(s.contains(sub), "--help missing {sub}: {s}");
    }
    run_ok(&["--version"]);
}

#[test]
fn usage_errors_exit_2() {
    let out = bin().args(["bundle", "build"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "missing required args");

    let out = bin()
        .args(["bundle", "build", "--config", "/nonexistent.toml", "--out", "/tmp/x.bin"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "missing config file");
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    let bundle = dir.path().join("bundle.bin");
    write_small_config(&config);
    let cfg_s = config.to_str().unwrap();
    let bundle_s = bundle.to_str().unwrap();

    // Build without annotation.
    let out = run_ok(&["bundle", "build", "--config", cfg_s, "--out", bundle_s]);
    assert!(stdout(&out).contains("400 edges"));
    assert!(bundle.exists());

    // Info on the raw bundle.
    let out = run_ok(&["bundle", "info", "--bundle", bundle_s]);
    let info = stdout(&out);
    assert!(info.contains("edges: 400"));
    assert!(info.contains("annotated: false"));

    // Annotate in place, with a CSV report.
    let csv = dir.path().join("edges.csv");
    let out = run_ok(&[
        "bundle", "analyze", "--config", cfg_s, "--bundle", bundle_s, "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(stdout(&out).contains("annotated 400 edges"));
    let report = std::fs::read_to_string(&csv).unwrap();
    assert!(report.starts_with("edge_id,p_lazy_prop,p_collision"));
    assert_eq!(report.lines().count(), 401);

    let out = run_ok(&["bundle", "info", "--bundle", bundle_s]);
    assert!(stdout(&out).contains("annotated: true"));

    // Plan between two free states; a deterministic iteration budget.
    let out = bin()
        .args([
            "plan", "--config", cfg_s, "--bundle", bundle_s, "--start", "0,0,0", "--goal",
            "0.4,0.2,-0.2", "--iterations", "20000",
        ])
        .output()
        .unwrap();
    let s = String::from_utf8_lossy(&out.stdout);
    match out.status.code() {
        // Found: cost line present and trajectory export works.
        Some(0) => {
            assert!(s.contains("best_cost:"), "stdout: {s}");
            let traj = dir.path().join("traj.csv");
            run_ok(&[
                "plan", "--config", cfg_s, "--bundle", bundle_s, "--start", "0,0,0", "--goal",
                "0.4,0.2,-0.2", "--iterations", "20000", "--out",
                traj.to_str().unwrap(),
            ]);
            let t = std::fs::read_to_string(&traj).unwrap();
            assert!(t.starts_with("time,q0,q1,q2,dq0,dq1,dq2"));
            assert!(t.lines().count() >= 2);
        }
        // A small smoke bundle may genuinely fail: that is exit 1, not 2.
        Some(1) => assert!(s.contains("no solution found"), "stdout: {s}"),
        other => panic!("unexpected exit {other:?}\nstdout: {s}"),
    }

    // A malformed start vector is a usage error.
    let out = bin()
        .args([
            "plan", "--config", cfg_s, "--bundle", bundle_s, "--start", "0,0", "--goal",
            "0.4,0.2,-0.2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Benchmark sweep reusing the annotated bundle, then re-report.
    let report_dir = dir.path().join("report");
    run_ok(&[
        "bench", "run", "--config", cfg_s, "--bundle", bundle_s, "--out-dir",
        report_dir.to_str().unwrap(),
    ]);
    for name in ["records.csv", "summary.csv", "significance.csv"] {
        assert!(report_dir.join(name).exists(), "missing {name}");
    }
    let report2 = dir.path().join("report2");
    run_ok(&[
        "bench", "report", "--records",
        report_dir.join("records.csv").to_str().unwrap(), "--out-dir",
        report2.to_str().unwrap(),
    ]);
    assert!(report2.join("summary.csv").exists());

    // Digest mismatch: same bundle against a different robot.
    let other_cfg = dir.path().join("other.toml");
    write_small_config(&other_cfg);
    let s = std::fs::read_to_string(&other_cfg).unwrap().replace(
        "link_length = [0.45, 0.4, 0.3]",
        "link_length = [0.5, 0.4, 0.3]",
    );
    assert!(s.contains("link_length = [0.5"), "robot section edit failed");
    std::fs::write(&other_cfg, s).unwrap();
    let out = bin()
        .args([
            "plan", "--config", other_cfg.to_str().unwrap(), "--bundle", bundle_s, "--start",
            "0,0,0", "--goal", "0.4,0.2,-0.2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "digest mismatch must be rejected");
}

#[test]
fn seed_override_changes_build() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    write_small_config(&config);
    let cfg_s = config.to_str().unwrap();
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    let c = dir.path().join("c.bin");
    run_ok(&["--seed", "11", "bundle", "build", "--config", cfg_s, "--out", a.to_str().unwrap()]);
    run_ok(&["--seed", "11", "bundle", "build", "--config", cfg_s, "--out", b.to_str().unwrap()]);
    run_ok(&["--seed", "12", "bundle", "build", "--config", cfg_s, "--out", c.to_str().unwrap()]);
    let (a, b, c) = (
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        std::fs::read(&c).unwrap(),
    );
    assert_eq!(a, b, "same seed must build byte-identical bundles");
    assert_ne!(a, c, "different seed must change the bundle");
}
