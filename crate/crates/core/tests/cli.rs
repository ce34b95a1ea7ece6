use std::fs;
use std::path::Path;
use std::process::Command;

fn sweep(config: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_optomech-sweep"))
        .arg(config)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn oracle_sweep_writes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "seed = 1\nmode = \"oracle\"\nstorage_times = [16.3, 40.8, 81.7]\nn_bath = [0.0, 1.0]\n",
    );
    let res = sweep(&cfg, &["--out-dir", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let header: Vec<_> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[..4], ["n_bath", "tau_s", "r", "delta_ent_mc"]);
    // oracle mode: MC columns empty
    let first: Vec<_> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[3], "");
    assert!(!first[6].is_empty());
    let ent = fs::read_to_string(out.join("entanglement.dat")).unwrap();
    assert_eq!(ent.matches("tau_s =").count(), 3);
    for f in ["timing.csv", "fidelity.dat", "steering.dat"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn monte_carlo_output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "seed = 8\nmode = \"mc\"\ntrajectories = 1000\nsteps = 400\nstorage_times = [16.3]\nn_bath = [0.5]\n",
    );
    let mut texts = Vec::new();
    for (i, workers) in ["1", "2", "1"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let res = sweep(&cfg, &["--workers", workers, "--out-dir", out.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        texts.push(fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[0], texts[2]);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(dir.path(), "sweep.toml", "seed = 1\nmode = \"mc\"\nstorage_times = [16.3]\nn_bath = [0]\n");
    let res = sweep(
        &cfg,
        &[
            "--mode",
            "oracle",
            "--seed",
            "17",
            "--steps",
            "1000",
            "--out-dir",
            out.to_str().unwrap(),
        ],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "sed = 1\nstorage_times = []\n");
    let res = sweep(&cfg, &[]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("`sed`"), "{err}");
    assert!(err.contains("seed"));
    assert!(err.contains("storage_times"));

    let missing = sweep(&dir.path().join("nope.toml"), &[]);
    assert_eq!(missing.status.code(), Some(1));

    let ok = write(dir.path(), "ok.toml", "seed = 1\n");
    let res = sweep(&ok, &["--mode", "fastest"]);
    assert_eq!(res.status.code(), Some(1));
    let res = sweep(&ok, &["--trajectories", "10"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = write(dir.path(), "file", "not a directory");
    let cfg = write(dir.path(), "sweep.toml", "seed = 1\nmode = \"oracle\"\nstorage_times = [16.3]\nn_bath = [0]\n");
    let res = sweep(&cfg, &["--out-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
