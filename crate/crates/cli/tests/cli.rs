use std::path::Path;
use std::process::{Command, Output};

use mkdv_ist::config::ExperimentConfig;
use mkdv_ist::io::ScatteringCache;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mkdv-lab")).args(args).output().expect("binary runs")
}

/// A small grid so scatter finishes in well under a second.
fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::default();
    cfg.grids.x_points = 1024;
    cfg.grids.z_points = 128;
    cfg.audit.amplitude_sweep = vec![0.2, 0.3];
    let path = dir.join("small.toml");
    cfg.save(&path).unwrap();
    path
}

#[test]
fn help_lists_every_subcommand() {
    let out = lab(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["scatter", "roundtrip", "evolve", "asymptotics", "perturbed", "audit"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
}

#[test]
fn scatter_writes_cache_and_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = lab(&["--config", cfg_path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", "99", "--threads", "2", "scatter"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("scatter"));

    let cache = ScatteringCache::read(&out_dir.join("scattering.json")).unwrap();
    assert_eq!(cache.r.len(), 128);
    assert!((cache.r[64].re - (0.3 * std::f64::consts::PI).tanh()).abs() < 1e-6);

    let effective = ExperimentConfig::load(&out_dir.join("config.toml")).unwrap();
    assert_eq!(effective.seed, 99);
    assert_eq!(effective.grids.z_points, 128);
    assert!(out_dir.join("plot.py").exists());
    assert!(out_dir.join("scatter_report.json").exists());
}

#[test]
fn errors_exit_with_one_and_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    // A box too narrow for the sech tail trips the decay gate.
    cfg.grids.x_half_width = 8.0;
    cfg.grids.x_points = 256;
    cfg.grids.z_points = 64;
    let path = dir.path().join("narrow.toml");
    cfg.save(&path).unwrap();
    let out = lab(&["--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "scatter"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("decay gate"), "{err}");
    assert!(err.contains("hint"), "{err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "seed = 1\nbogus = 2\n").unwrap();
    let out = lab(&["--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "scatter"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    // Exit code 2 is reserved for inconclusive verdicts.
    assert_eq!(lab(&[]).status.code(), Some(1));
    assert_eq!(lab(&["scatter", "--threads", "many"]).status.code(), Some(1));
}
