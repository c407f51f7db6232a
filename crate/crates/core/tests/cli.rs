use plapctl::cli::{cli_main, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER};
use plapctl::homotopy::HomotopyTelemetry;
use std::path::Path;
use std::process::Command;

fn plapctl(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_plapctl")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lists_the_catalog() {
    let (code, out) = plapctl(&["list-instances"]);
    assert_eq!(code, 0);
    for name in ["closed_form_1d", "monotone_decoupled", "multisolution", "bangbang_sec6", "radial_degenerate"] {
        assert!(out.contains(name), "{out}");
    }
}

#[test]
fn solve_state_writes_the_closed_form_profile() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = plapctl(&["solve-state", "--instance", "closed_form_1d", "--n", "256", "--out", path(dir.path())]);
    assert_eq!(code, 0, "{out}");
    let csv = std::fs::read_to_string(dir.path().join("y.csv")).unwrap();
    let max = csv
        .lines()
        .filter_map(|l| l.rsplit(',').next()?.trim().parse::<f64>().ok())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((max - 1.0 / 24.0).abs() < 1e-3, "{max}");
}

#[test]
fn configuration_errors_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "instance = closed_form_1d\nproblem.p = 2.5\n").unwrap();
    assert_eq!(plapctl(&["solve-state", "--config", path(&bad)]).0, EXIT_CONFIG);
    std::fs::write(&bad, "instance = closed_form_1d\nmystery = 1\n").unwrap();
    assert_eq!(plapctl(&["solve-state", "--config", path(&bad)]).0, EXIT_CONFIG);
    assert_eq!(plapctl(&["solve-state", "--instance", "nope"]).0, EXIT_CONFIG);
    assert_eq!(plapctl(&["solve-state", "--n", "lots"]).0, EXIT_CONFIG);
    assert_eq!(cli_main(["plapctl", "frobnicate"]), EXIT_CONFIG);
    assert_eq!(cli_main(["plapctl", "--help"]), EXIT_OK);
}

#[test]
fn unreachable_inner_tolerance_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "instance = bangbang_sec6\nn = 16\ninner.max_sweeps = 1\ninner.tol = 1e-300\nhomotopy.max_insertions = 0\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(plapctl(&["optimize", "--config", path(&cfg), "--out", path(&out)]).0, EXIT_SOLVER);
    let tel = HomotopyTelemetry::parse(&std::fs::read_to_string(out.join("telemetry.ndrec")).unwrap()).unwrap();
    assert!(tel.to_lines().contains("\"kind\":\"failure\""));
}

#[test]
fn verify_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = plapctl(&["verify", "--instance", "monotone_decoupled", "--n", "64", "--out", path(dir.path())]);
    assert_eq!(code, 0, "{out}");
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.starts_with("overall = pass"), "{report}");
    for name in ["nontriviality", "adjoint_residual", "degenerate_set", "hamiltonian_max", "spike_derivative", "bang_bang"] {
        assert!(report.contains(&format!("[{name}]")), "{report}");
    }
    for file in ["y.csv", "u.csv", "v.csv", "psi.csv", "telemetry.ndrec"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let tel = HomotopyTelemetry::parse(&std::fs::read_to_string(dir.path().join("telemetry.ndrec")).unwrap()).unwrap();
    assert!(tel.to_lines().lines().next().unwrap().contains("\"kind\":\"reference\""));
    assert_eq!(tel.block_ends().count(), 20);
}

#[test]
fn demo_multiplicity_finds_several_states() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = plapctl(&["demo-multiplicity", "--n", "64", "--out", path(dir.path())]);
    assert_eq!(code, 0, "{out}");
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("solutions = 3"), "{report}");
    assert!(dir.path().join("y_2.csv").exists());
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# 1-D p-Laplacian with a unit load\nproblem.domain = interval(0, 1)\nproblem.p = 1.5\nproblem.a = 0\nproblem.b = 2\nproblem.f = poly(0)\nproblem.control = 1\n",
    )
    .unwrap();
    let (code, out) = plapctl(&["solve-state", "--config", path(&cfg), "--n", "128", "--out", path(dir.path())]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("max 4.16"), "{out}");
}

#[test]
fn repeated_runs_write_identical_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let (code, _) = plapctl(&["optimize", "--instance", "bangbang_sec6", "--n", "32", "--seed", "5", "--out", path(&out)]);
        assert_eq!(code, 0);
        std::fs::read(out.join("telemetry.ndrec")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}
