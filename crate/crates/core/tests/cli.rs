use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use overact::config::ExperimentConfig;

fn overact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overact")).args(args).output().unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn mcar_demo_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("mcar_demo.toml");
    let out = overact(&["mcar-demo", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("mcar_demo.csv")).unwrap();
    assert!(text.starts_with("# overact mcar-demo"));
    let body = overact::runner::csv_body(&text);
    assert!(body.starts_with("controller,time_dist,seed,success,steps,max_x\n"));
    // 25 lags plus one baseline row per seed
    assert_eq!(body.lines().count(), 1 + 25 + 10);
}

#[test]
fn seed_offset_and_workers_flags() {
    let cfg = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(cfg.path(), "kind = \"variance-sweep\"\nseeds = [3]\n[variance]\nsamples = 2000\n").unwrap();
    let run = |extra: &[&str]| {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["variance-sweep", "--config", cfg.path().to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = overact(&args);
        assert_eq!(out.status.code(), Some(0));
        std::fs::read_to_string(dir.path().join("variance_sweep.csv")).unwrap()
    };
    let base = run(&[]);
    assert_eq!(base, run(&["--workers", "4"]));
    assert_ne!(base, run(&["--seed-offset", "1"]));
}

#[test]
fn log_steps_writes_ndjson() {
    let cfg = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(
        cfg.path(),
        "kind = \"explore\"\nseeds = [0]\n[explore]\ncontrollers = [\"dep\"]\nmultipliers = [1]\nepisodes = 1\nblock = 1\nhorizon = 20\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = overact(&["explore", "--config", cfg.path().to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--log-steps"]);
    assert_eq!(out.status.code(), Some(0));
    let log = std::fs::read_to_string(dir.path().join("steps_torquearm_dep_n1_seed0.ndjson")).unwrap();
    assert_eq!(log.lines().count(), 20);
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["t", "state", "action", "reward", "tag"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn config_errors_exit_2() {
    let bad = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(bad.path(), "kind = \"explore\"\nseeds = [0]\nbogus = 1\n").unwrap();
    assert_eq!(overact(&["explore", "--config", bad.path().to_str().unwrap()]).status.code(), Some(2));
    // right file, wrong subcommand
    let cfg = configs_dir().join("mcar_demo.toml");
    assert_eq!(overact(&["explore", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(overact(&["psd-check", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
    let empty = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(empty.path(), "kind = \"psd-check\"\nseeds = []\n").unwrap();
    assert_eq!(overact(&["psd-check", "--config", empty.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let blocker = tempfile::NamedTempFile::new().unwrap();
    let cfg = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(cfg.path(), "kind = \"variance-sweep\"\nseeds = [0]\n[variance]\nsamples = 100\n").unwrap();
    // the output "directory" is an existing regular file
    let out = overact(&["variance-sweep", "--config", cfg.path().to_str().unwrap(), "--out", blocker.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
