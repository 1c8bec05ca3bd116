use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn morphwing(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphwing"))
        .args(["--out-dir", dir.to_str().unwrap()])
        .args(args)
        .output()
        .expect("spawn morphwing")
}

fn coarse_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("coarse.toml");
    fs::write(
        &path,
        "schema_version = 1\n\
         [sweep.twist]\nmin = -90.0\nmax = 90.0\nstep = 30.0\n\
         [sweep.camber]\nmin = 0.0\nmax = 60.0\nstep = 30.0\n\
         [sweep.extension]\nmin = -20.0\nmax = 30.0\nstep = 25.0\n",
    )
    .unwrap();
    path
}

#[test]
fn generate_writes_lattice_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = morphwing(&["generate"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("lattice.txt").exists());
    assert!(dir.path().join("generate_report.txt").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fingerprint:"), "{stdout}");
}

#[test]
fn invalid_config_exits_2_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "schema_version = 1\n[mesh]\nvoxel = -0.5\n").unwrap();
    let out = morphwing(&["--config", cfg.to_str().unwrap(), "generate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mesh"), "{stderr}");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "schema_version = 1\nwingspan = 250.0\n").unwrap();
    let out = morphwing(&["--config", cfg.to_str().unwrap(), "generate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wingspan"));
}

#[test]
fn fit_without_dataset_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let out = morphwing(&["fit"], dir.path());
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn sense_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse_config(dir.path());
    let cfg = cfg.to_str().unwrap();

    let a_dir = dir.path().join("a");
    let b_dir = dir.path().join("b");
    let c_dir = dir.path().join("c");
    for (d, seed) in [(&a_dir, "7"), (&b_dir, "7"), (&c_dir, "8")] {
        let out = Command::new(env!("CARGO_BIN_EXE_morphwing"))
            .args(["--out-dir", d.to_str().unwrap(), "--config", cfg, "--seed", seed, "sense"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(a_dir.join("sweep.csv")).unwrap();
    let b = fs::read(b_dir.join("sweep.csv")).unwrap();
    let c = fs::read(c_dir.join("sweep.csv")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn sense_fit_estimate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let out = morphwing(&["--config", cfg, "sense"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("sensor_response.svg").exists());

    let out = morphwing(&["--config", cfg, "fit"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("holdout rmse"));

    let readings = dir.path().join("readings.csv");
    fs::write(&readings, "s1,s2,s3,s4,s5,s6\n0.9,0.9,0.9,0.9,0.9,0.9\n").unwrap();
    let out = morphwing(
        &["--config", cfg, "estimate", "--readings", readings.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert!(est.starts_with("twist_deg,camber_deg,extension_mm\n"));
    assert_eq!(est.lines().count(), 2);
}

#[test]
fn estimate_rejects_bad_reading_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    assert!(morphwing(&["--config", cfg, "sense"], dir.path()).status.success());
    assert!(morphwing(&["--config", cfg, "fit"], dir.path()).status.success());
    let readings = dir.path().join("readings.csv");
    fs::write(&readings, "s1,s2,s3,s4,s5,s6\n0.9,0.9,oops,0.9,0.9,0.9\n").unwrap();
    let out = morphwing(
        &["--config", cfg, "estimate", "--readings", readings.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(":2:"), "{stderr}");
}

#[test]
fn analyze_writes_response_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = morphwing(&["analyze"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "response_twist.csv",
        "response_camber.csv",
        "response_extension.csv",
        "analysis_summary.csv",
        "twist_distribution.svg",
        "camber_distribution.svg",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let summary = fs::read_to_string(dir.path().join("analysis_summary.csv")).unwrap();
    assert!(summary.starts_with(
        "mode,twist_deg,camber_deg,extension_mm,outer_half_twist_fraction,equilibrium_residual"
    ));
    assert_eq!(summary.lines().count(), 4);
}
