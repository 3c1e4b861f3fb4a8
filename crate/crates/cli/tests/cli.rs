use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nyfold::output::{records_from_csv, Manifest};

fn nyfold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nyfold")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_in(dir: &Path, experiment: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = write_config(dir, config);
    let out = dir.join("out");
    let mut args = vec![experiment, "--config", &cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    nyfold(&args)
}

#[test]
fn strip_table_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "strip-table", "seed = 7\n", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let records = records_from_csv(&csv).unwrap();
    let rows: Vec<(f64, f64)> = records.iter().map(|r| (r.x, r.value)).collect();
    assert_eq!(rows, vec![(0.1, 84.0), (0.05, 42.0), (0.01, 8.0), (0.005, 4.0)]);

    let manifest = Manifest::from_toml(&fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap()).unwrap();
    assert_eq!(manifest.experiment, "strip-table");
    assert_eq!(manifest.seed, 7);
    assert_eq!(manifest.records, records);
    assert_eq!(manifest.config["k_samples"].as_integer(), Some(20_000));
    assert!(dir.path().join("out/plot_strip_table.svg").exists());
}

#[test]
fn command_line_seed_and_scale_win() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "strip-table", "seed = 7\nscale = \"desk\"\n", &["--seed", "11", "--scale", "full"]);
    assert!(out.status.success());
    let manifest = Manifest::from_toml(&fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap()).unwrap();
    assert_eq!((manifest.seed, manifest.scale.as_str()), (11, "full"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = "seed = 3\n[spectrum.grid]\nn_points = 32768\n[spectrum]\nwindow = 2048\nhop = 1024\n";
    let cfg = write_config(dir.path(), config);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = nyfold(&["spectrum", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(
            ["results.csv", "spectrum.csv", "spectrogram.csv"]
                .map(|f| fs::read(out_dir.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for (experiment, config) in [
        ("strip-table", ""),
        ("strip-table", "seed = 1\n[strip_table]\ntolerance = [0.1]\n"),
        ("strip-table", "seed = 1\nexperiment = \"fig9\"\n"),
        ("strip-table", "seed = 1\nbogus = 2\n"),
        ("fig10", "seed = 1\n[fig10.grid]\nt_atom_s = -1.0\n"),
    ] {
        let out = run_in(dir.path(), experiment, config, &[]);
        assert_eq!(out.status.code(), Some(2), "{config}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = nyfold(&["strip-table", "--config", "/nonexistent/config.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    let unknown = nyfold(&["fig11", "--config", "x"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    // A 1 GHz grid cannot hold a 2 GHz clock: consecutive samples collide.
    let dir = tempfile::tempdir().unwrap();
    let config = "seed = 1\n[fig10]\nsparsities = [1]\ntrials = 1\n[fig10.grid]\nt_atom_s = 1e-9\nn_points = 1000\n";
    let out = run_in(dir.path(), "fig10", config, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("same grid index"));
}

#[test]
fn unwritable_output_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("out");
    fs::write(&blocker, "not a directory").unwrap();
    let out = run_in(dir.path(), "strip-table", "seed = 1\n", &[]);
    assert_eq!(out.status.code(), Some(1));
}
