//! Black-box tests of the `domds` binary: subcommand behavior, exit codes,
//! and end-to-end determinism of the emitted files.

use std::path::Path;
use std::process::{Command, Output};

fn domds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SMALL_CFG: &str = "\
    scenario.kind = uniform\n\
    scenario.n = 10\n\
    run.iterations = 400\n\
    run.replicas = 2\n\
    run.seed = 3\n\
    algorithm = domds\n";

#[test]
fn run_writes_reports_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    write(&cfg, SMALL_CFG);
    let out_dir = tmp.path().join("out");
    let out = domds(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("mean RMSE"), "summary line missing: {stdout}");
    let rmse = std::fs::read_to_string(out_dir.join("rmse.csv")).unwrap();
    assert!(rmse.starts_with("replica,tick,broadcasts,rmse_m,wall_ms\n"));
    assert!(out_dir.join("rmse_mean.csv").exists());
    assert!(out_dir.join("positions_final.csv").exists());
}

#[test]
fn identical_seeds_reproduce_reports_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    write(&cfg, SMALL_CFG);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = domds(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert!(out.status.success());
    }
    for name in ["rmse.csv", "rmse_mean.csv", "positions_final.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn gen_then_eval_scores_zero_against_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    write(&cfg, "scenario.kind = uniform\nscenario.n = 8\nscenario.anchors = 0, 1, 2\n");
    let scen = tmp.path().join("scenario.csv");
    let out = domds(&["gen", "--config", cfg.to_str().unwrap(), "--out", scen.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    for alignment in ["none", "procrustes", "anchors"] {
        let out = domds(&[
            "eval",
            "--est",
            scen.to_str().unwrap(),
            "--truth",
            scen.to_str().unwrap(),
            "--alignment",
            alignment,
        ]);
        assert!(out.status.success(), "alignment {alignment}");
        let stdout = String::from_utf8(out.stdout).unwrap();
        let value: f64 = stdout.trim().strip_prefix("rmse_m = ").unwrap().parse().unwrap();
        assert!(value < 1e-9, "alignment {alignment}: rmse {value}");
    }
}

#[test]
fn overrides_show_up_in_inspect() {
    let out = domds(&["inspect", "--algorithm", "oja", "--replicas", "3", "--seed", "55"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("algorithm = oja"), "{stdout}");
    assert!(stdout.contains("3 replicas, seed 55"), "{stdout}");
    assert!(stdout.contains("bias_constant C = 1.07962356e0"), "{stdout}");
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    write(&cfg, "scenario.kind = grid\nscenario.rows = 2\nscenario.cols = 2\nscenario.n = 9\n");
    let out = domds(&["inspect", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid capacity"));

    // Unknown keys are hard errors, not warnings.
    write(&cfg, "chanel.eta = 2.0\n");
    let out = domds(&["inspect", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Bad override value through the flag path.
    let out = domds(&["run", "--algorithm", "simulated-annealing", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_files_exit_4() {
    let out = domds(&["inspect", "--config", "/nonexistent/exp.cfg"]);
    assert_eq!(out.status.code(), Some(4));
    let out = domds(&["eval", "--est", "/nonexistent/a.csv", "--truth", "/nonexistent/b.csv"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn degenerate_geometry_exits_3() {
    // Collinear nodes measured exactly: the similarity matrix has rank 1,
    // so the batch solver cannot span two dimensions and must say so.
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("line.csv");
    write(
        &scen,
        "node,x_m,y_m,is_anchor\n0,0.0,0.0,0\n1,1.0,0.0,0\n2,2.0,0.0,0\n3,3.0,0.0,0\n",
    );
    let cfg = tmp.path().join("exp.cfg");
    write(
        &cfg,
        &format!(
            "scenario.kind = explicit\nscenario.path = {}\n\
             channel.sigma2 = 0\nobservation.q = 1.0\n\
             algorithm = batch-mds\nrun.iterations = 20\nrun.replicas = 1\n",
            scen.display()
        ),
    );
    let out = domds(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}
