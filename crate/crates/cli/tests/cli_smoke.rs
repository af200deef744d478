//! Black-box checks of the binary: exit codes, the files a run promises,
//! and the round trip from a site dump back through render.

use std::process::Command;

fn vorotop() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vorotop"))
}

#[test]
fn run_emits_the_documented_files_and_render_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("job");
    let status = vorotop()
        .args(["run", "--preset", "pushdown_two_sites", "--max-iter", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["log.csv", "density_final.pgm", "sites_final.toml"] {
        assert!(out.join(name).is_file(), "{name} missing from the run output");
    }
    let log = std::fs::read_to_string(out.join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3, "header plus one line per iteration");
    assert!(log.starts_with("iteration,compliance,"));

    let render = dir.path().join("render.pgm");
    let status = vorotop()
        .arg("render")
        .arg(out.join("sites_final.toml"))
        .args(["--preset", "pushdown_two_sites", "--out"])
        .arg(&render)
        .status()
        .unwrap();
    assert!(status.success());
    let bytes = std::fs::read(&render).unwrap();
    assert!(bytes.starts_with(b"P5"), "render output is not a binary PGM");
}

#[test]
fn masked_preset_refuses_to_run_blind() {
    let dir = tempfile::tempdir().unwrap();
    let output = vorotop()
        .args(["run", "--preset", "masked", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("--mask"), "stderr should point at --mask: {err}");
}

#[test]
fn gradient_audit_passes_from_the_command_line() {
    let status = vorotop()
        .args(["check-gradients", "--trials", "4"])
        .status()
        .unwrap();
    assert!(status.success());
}
