use std::fs;
use std::path::Path;
use std::process::Command;

fn qtensor() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qtensor"));
    c.env_remove(qtensor_cli::OUT_DIR_ENV);
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

const EQUILIBRIUM: &str =
    "t_end = 0.2\n[geometry]\nmode = \"torus\"\nd = 2\nlengths = [6.283185307179586, 6.283185307179586]\n\
                           [modes]\nn_q = 12\nn_u = 6\n[initial]\namplitude = 0.0\n";

#[test]
fn verify_on_equilibrium_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EQUILIBRIUM);
    let out = dir.path().join("out");
    let st = qtensor().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    let stdout = String::from_utf8_lossy(&st.stdout);
    assert!(st.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
    assert!(out.join("verify.txt").exists());
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}[verify]\nweak_tolerance = 1e-30\n",
        EQUILIBRIUM.replace("amplitude = 0.0", "amplitude = 0.3\npreset = \"random\"")
    );
    let cfg = write_config(dir.path(), &text);
    let st = qtensor().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EQUILIBRIUM);
    let target = dir.path().join("from_env");
    let st = qtensor().args(["eigen", "--config"]).arg(&cfg).env(qtensor_cli::OUT_DIR_ENV, &target).output().unwrap();
    assert!(st.status.success());
    assert!(target.join("eigen.csv").exists());
}

#[test]
fn config_errors_exit_two_with_tagged_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{EQUILIBRIUM}[params]\nc = -1.0\n"));
    let st = qtensor().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let err = String::from_utf8_lossy(&st.stderr);
    assert!(err.contains("config:") && err.contains("c must be > 0"), "{err}");

    let bad = write_config(dir.path(), "[geometry\nmode = 1\n");
    let st = qtensor().args(["simulate", "--config"]).arg(&bad).output().unwrap();
    let err = String::from_utf8_lossy(&st.stderr);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let text = EQUILIBRIUM.replace("amplitude = 0.0", "amplitude = 0.3\npreset = \"random\"");
    let cfg = write_config(dir.path(), &text);
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        assert!(qtensor()
            .args(["simulate", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap()
            .status
            .success());
        fs::read(out.join("energy.csv")).unwrap()
    };
    assert_eq!(run("3", "a"), run("3", "b"));
    assert_ne!(run("3", "a"), run("4", "c"));
}
