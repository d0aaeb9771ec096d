use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssf-biofilm"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cli")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn shipped_configs_pass_check() {
    for entry in std::fs::read_dir(config("")).unwrap() {
        let path = entry.unwrap().path();
        let out = run(&["check", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("config ok"));
    }
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bare = dir.path().join("bare.toml");
    std::fs::write(&bare, "scenario = \"discs_close\"\n").unwrap();
    let out = run(&["check", bare.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("CFL"));

    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "scenario = \"discs_far\"\n\nresolutoin = 8\n").unwrap();
    let out = run(&["check", typo.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&run(&["check", missing.to_str().unwrap()])), 2);

    let far = config("discs_far.toml");
    assert_eq!(code(&run(&["check", far.to_str().unwrap(), "--dt", "-1"])), 2);
    assert_eq!(code(&run(&["check", far.to_str().unwrap(), "--resolution", "0"])), 2);
    assert_eq!(code(&run(&["check", far.to_str().unwrap(), "--r1", "100"])), 2);
}

#[test]
fn run_writes_series_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        config("discs_far.toml").to_str().unwrap(),
        "--resolution",
        "6",
        "--t-end",
        "3e-4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("discs_far_series.csv")).unwrap();
    // header + step 0 + three steps
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("discs_far_0000.vtk").exists());
}

#[test]
fn invariant_violation_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("abort.toml");
    std::fs::write(
        &cfg,
        "scenario = \"discs_close\"\nresolution = 6\nt_end = 2e-4\nsnapshot_times = []\nenforce_cfl = false\non_violation = \"abort\"\n",
    )
    .unwrap();
    let out = run(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invariant violation"));
}

#[test]
fn mesh_subcommand_dumps_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "mesh",
        config("ssf.toml").to_str().unwrap(),
        "--resolution",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let vtk = ssf_biofilm::io::read_vtk(&dir.path().join("ssf_mesh.vtk")).unwrap();
    let area: f64 = vtk.cell_scalars["area"].iter().sum();
    assert!((area - (0.25 + 0.1 * 0.025)).abs() < 1e-12);
    assert!(vtk.cell_scalars["boundary"].contains(&2.0));
    assert!(vtk.cell_scalars["boundary"].contains(&3.0));
}
