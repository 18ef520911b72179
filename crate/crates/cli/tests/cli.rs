use std::path::Path;
use std::process::{Command, Output};

fn subdiff(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subdiff"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SUBDIFF_WORKERS")
        .output()
        .unwrap()
}

fn json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn certify_a_generated_uniform_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let gen = subdiff(dir.path(), &["mesh-generate", "--mesh", "uniform", "--K", "16"]);
    assert_eq!(gen.status.code(), Some(0), "{}", stderr(&gen));
    let mesh = dir.path().join("mesh.txt");
    let text = std::fs::read_to_string(&mesh).unwrap();
    assert!(text.starts_with("# subdiff "));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 17);

    let cert = subdiff(dir.path(), &["mesh-certify", "--file", mesh.to_str().unwrap()]);
    assert_eq!(cert.status.code(), Some(0));
    let v = json(&cert);
    assert_eq!(v["report"]["satisfied"], true);
    assert_eq!(v["steps"], 16);
}

#[test]
fn certify_reports_an_inadmissible_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("bad.txt");
    std::fs::write(&mesh, "0\n1\n1.3\n1.6\n").unwrap();
    let cert = subdiff(dir.path(), &["mesh-certify", "--file", mesh.to_str().unwrap()]);
    assert_eq!(cert.status.code(), Some(0));
    let v = json(&cert);
    assert_eq!(v["report"]["satisfied"], false);
    assert_eq!(v["report"]["first_violation"], 2);
}

#[test]
fn solve_matches_the_published_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = subdiff(
        dir.path(),
        &["solve", "--alpha", "0.7", "--mesh", "graded:r=2.857", "--K", "40", "--space", "d1:10000"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let err = json(&out)["max_error"].as_f64().unwrap();
    assert!((err / 1.7758e-4 - 1.0).abs() < 0.01, "{err:e}");
    for name in ["diagnostics.csv", "solution.csv", "solve.json"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.contains("tolerances"), "{name}");
    }
}

#[test]
fn solve_reports_the_reference_on_the_published_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = subdiff(
        dir.path(),
        &["solve", "--alpha", "0.3", "--mesh", "uniform", "--K", "40", "--paper-exact"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["space"], "d1:10000");
    assert_eq!(v["reference"], 2.36e-2);
}

#[test]
fn periodic_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = subdiff(
        dir.path(),
        &["solve", "--alpha", "0.5", "--mesh", "graded:r=2/alpha", "--K", "20", "--space", "p2:16"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(json(&out)["max_error"].as_f64().unwrap() < 1e-2);
    let snapshot = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert!(snapshot.contains("x,y,u"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["solve", "--alpha", "1.5", "--K", "4"],
        vec!["solve", "--alpha", "0.5"],
        vec!["solve", "--alpha", "0.5", "--K", "4", "--frobnicate"],
        vec!["solve", "--alpha", "0.5", "--K", "4", "--mesh", "spiral"],
        vec!["mesh-generate", "--mesh", "r-variable", "--K", "8"],
        vec!["reproduce-tables", "--ks", "80,40"],
        vec!["mesh-certify", "--file", "/nonexistent/mesh.txt"],
    ] {
        let out = subdiff(dir.path(), &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr(&out).starts_with("error[validation]: "), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn worker_count_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_subdiff"))
            .args(["mesh-generate", "--K", "4", "--out"])
            .arg(dir.path())
            .env("SUBDIFF_WORKERS", workers)
            .output()
            .unwrap()
    };
    assert_eq!(run("2").status.code(), Some(0));
    let bad = run("zero");
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("SUBDIFF_WORKERS"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "alpha = 0.5\nK = 12\nmesh = \"graded:r=2/alpha\"\n").unwrap();
    let out = subdiff(
        dir.path(),
        &["solve", "--alpha", "0.3", "--K", "5", "--space", "d1:64", "--config", config.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["alpha"], 0.5);
    assert_eq!(v["steps"], 12);
    assert_eq!(v["mesh"], "graded:r=2/alpha");

    std::fs::write(&config, "colour = \"red\"\n").unwrap();
    let out = subdiff(dir.path(), &["solve", "--alpha", "0.3", "--K", "5", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_emits_a_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = subdiff(
        dir.path(),
        &["analyze", "--alpha", "0.7", "--mesh", "graded:r=2/alpha", "--K", "32", "--dump-kernel"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["psd"]["passed"], true);
    assert_eq!(v["psd"]["n"], 32);
    assert!(v["p_violations"].as_array().unwrap().is_empty());
    assert!(v["q_violations"].as_array().unwrap().is_empty());
    assert!(v["complementary_kernel"]["residual"].as_f64().unwrap() < 1e-11);
    let kernel = std::fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert!(kernel.contains("k,j,a,b,c,d,M"));
}

#[test]
fn reproduce_table_cells_on_the_published_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = subdiff(
        dir.path(),
        &["reproduce-tables", "--alpha", "0.5", "--paper-exact", "--ks", "40,80", "--pointwise"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("alpha,mesh,quantity,K=40,K=80"));
    assert!(table.contains("0.5,r=2/α,error,2.2728e-4,5.8725e-5"));
    for name in ["tables.csv", "cells.csv", "levels.csv", "summary.json", "pointwise_alpha0.5.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.contains("reproduce-tables"), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["tolerance_failures"], 0);
}

#[test]
fn tolerance_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "alphas = [0.3]\nmeshes = [\"uniform\"]\nks = [40]\nspace = \"d1:10000\"\n\n[tolerance]\nenabled = true\nlarge = 1e-9\nsmall = 1e-9\n",
    )
    .unwrap();
    let out = subdiff(dir.path(), &["reproduce-tables", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("error[tolerance]: 1 cell(s)"));
    assert!(dir.path().join("cells.csv").exists());
}

#[test]
fn soak_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = subdiff(
        dir.path(),
        &["soak", "--alpha", "0.6", "--T", "10", "--K", "100", "--intervals", "64", "--forcing", "free-decay"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["verdict"]["nonincreasing"], true);

    let mesh = dir.path().join("bad.txt");
    std::fs::write(&mesh, "0\n1\n1.3\n1.6\n1.9\n").unwrap();
    let desc = format!("file:{}", mesh.display());
    let out = subdiff(dir.path(), &["soak", "--mesh", &desc, "--intervals", "16", "--forcing", "free-decay"]);
    assert!(stderr(&out).starts_with("warning: "), "{}", stderr(&out));
    assert_eq!(json(&out)["admissible"], false);
}
