//! End-to-end tests of the `nutrans` binary: exit codes, report files, and
//! byte-level determinism of the CSV output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nutrans"))
}

/// Path of a scenario shipped with the repository.
fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("case.scn");
    std::fs::write(&path, text).unwrap();
    path
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing report {name}: {e}"))
}

fn assert_code(out: &Output, want: i32) {
    let got = out.status.code().expect("process was signalled");
    assert_eq!(
        got,
        want,
        "exit code {got}, wanted {want}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const SMALL: &str = "\
grid.n_r = 12\n\
grid.r_max = 1.0\n\
grid.n_mu = 4\n\
grid.n_omega = 2\n\
grid.omega_min = 3.0\n\
grid.omega_ratio = 1.3\n\
rates.j = 0.0:0.5 1.0:0.2\n\
rates.chi = 0.9\n\
rates.phi0 = 0.3\n\
rates.phi1 = 0.1\n\
initial.f = 0.2\n\
solve.t_end = 0.5\n";

#[test]
fn run_boltzmann_writes_reports_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let result = bin()
            .args(["run-boltzmann", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert_code(&result, 0);
    }

    for name in [
        "boltzmann_moments.csv",
        "boltzmann_final.csv",
        "boltzmann_ledger.csv",
        "manifest.txt",
    ] {
        let a = read(&out_a, name);
        let b = read(&out_b, name);
        assert_eq!(a, b, "{name} differs between identical runs");
        assert!(!a.is_empty());
    }

    let manifest = read(&out_a, "manifest.txt");
    assert!(manifest.contains(&format!("# nutrans {}", env!("CARGO_PKG_VERSION"))));
    assert!(manifest.contains("# command: run-boltzmann"));
    assert!(manifest.contains("rates.chi = 0.9"));
    let assignments: Vec<&str> = manifest.lines().filter(|l| !l.starts_with('#')).collect();
    let mut sorted = assignments.clone();
    sorted.sort_unstable();
    assert_eq!(assignments, sorted, "manifest echo must be key-sorted");

    let moments = read(&out_a, "boltzmann_moments.csv");
    assert_eq!(moments.lines().next().unwrap(), "time,r,omega,beta,flux");
    // two snapshots, 12 cells, 2 groups
    assert_eq!(moments.lines().count(), 1 + 2 * 12 * 2);
}

#[test]
fn run_idsa_writes_final_state_with_regime_labels() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let result = bin()
        .args(["run-idsa", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&result, 0);

    let final_csv = read(dir.path(), "idsa_final.csv");
    let mut rows = 0;
    for line in final_csv.lines().skip(1) {
        let regime = line.rsplit(',').next().unwrap();
        assert!(
            ["diffusion", "reaction", "free_streaming"].contains(&regime),
            "unknown regime label {regime}"
        );
        rows += 1;
    }
    assert_eq!(rows, 12 * 2);
    assert!(read(dir.path(), "manifest.txt").contains("# command: run-idsa"));
}

#[test]
fn compare_runs_both_solvers_on_a_shipped_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let result = bin()
        .args(["compare", "--scenario"])
        .arg(shipped("relaxation.scn"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&result, 0);
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("compare:"), "summary line missing: {stdout}");
    let csv = read(dir.path(), "compare.csv");
    assert_eq!(
        csv.lines().next().unwrap(),
        "r,omega,beta_kinetic,beta_trapped,beta_streaming,diff,regime"
    );
    assert!(csv.lines().count() > 64);
}

#[test]
fn missing_scenario_flag_is_a_usage_error() {
    let result = bin().arg("run-boltzmann").output().unwrap();
    assert_code(&result, 2);
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("--scenario"), "unhelpful message: {stderr}");
}

#[test]
fn broken_scenarios_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();

    let unknown_key = write_scenario(dir.path(), "grid.n_x = 4\n");
    let result = bin()
        .args(["run-boltzmann", "--scenario"])
        .arg(&unknown_key)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&result, 2);

    let result = bin()
        .args(["run-boltzmann", "--scenario", "/nonexistent/nowhere.scn"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&result, 2);
}

#[test]
fn oversized_fixed_step_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), &format!("{SMALL}solve.dt = 1e6\n"));
    let result = bin()
        .args(["run-boltzmann", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&result, 3);
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.starts_with("error:"), "missing prefix: {stderr}");
}

#[test]
fn scenario_sweep_runs_the_configured_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let result = bin()
        .args(["epsilon-sweep", "--scenario"])
        .arg(shipped("sweep_reaction.scn"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&result, 0);
    let csv = read(dir.path(), "sweep.csv");
    assert_eq!(csv.lines().next().unwrap(), "epsilon,error,error_half");
    assert_eq!(csv.lines().count(), 3, "one row per configured epsilon");
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("sweep reaction"), "summary: {stdout}");
}

#[test]
fn sweep_without_a_sweep_block_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let result = bin()
        .args(["epsilon-sweep", "--scenario"])
        .arg(shipped("relaxation.scn"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&result, 2);
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let result = bin()
        .args(["epsilon-sweep", "--preset", "bogus"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&result, 2);
}

#[test]
fn hierarchy_check_writes_the_level_table() {
    let dir = tempfile::tempdir().unwrap();
    let result = bin()
        .args(["hierarchy-check", "--scenario"])
        .arg(shipped("hierarchy_time.scn"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_code(&result, 0);
    let csv = read(dir.path(), "hierarchy.csv");
    assert_eq!(csv.lines().next().unwrap(), "level,level_norm,defect_norm");
    assert_eq!(csv.lines().count(), 4, "three expansion levels");
    assert!(read(dir.path(), "manifest.txt").contains("# command: hierarchy-check"));
}
