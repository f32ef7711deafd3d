// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs of the `lrchain` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lrchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrchain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lrchain-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// Data rows of a CSV written by the tool (comment lines and header dropped).
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn analytic_gap() {
    let dir = scratch("gap");
    let o = lrchain(&[
        "gap",
        "--analytic",
        "--n",
        "1000",
        "--w",
        "100",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let _ = std::fs::remove_dir_all(&dir);
    let g: f64 = stdout(&o).trim().parse().unwrap();
    let want = 100.0 / (0.2f64).exp_m1();
    assert!((g - want).abs() < 1e-6, "{g} vs {want}");
}

#[test]
fn current_sweep_writes_one_row_per_w() {
    let dir = scratch("current");
    let o = lrchain(&[
        "current",
        "--n",
        "20",
        "--w-grid",
        "1e-1:1e2:4",
        "--realizations",
        "3",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.join("current.csv")).unwrap();
    assert!(text.starts_with("# units:"));
    let r = rows(&dir.join("current.csv"));
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|row| row[1] == "20"));
    assert!(dir.join("manifest.json").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn resume_gives_identical_output() {
    let dir = scratch("resume");
    let args = [
        "current",
        "--n",
        "16",
        "--w-grid",
        "1:1e3:3",
        "--realizations",
        "4",
        "--out-dir",
        dir.to_str().unwrap(),
    ];
    assert!(lrchain(&args).status.success());
    let first = std::fs::read_to_string(dir.join("current.csv")).unwrap();
    let mut again = vec!["--resume"];
    again.extend_from_slice(&args);
    assert!(lrchain(&again).status.success());
    assert_eq!(
        std::fs::read_to_string(dir.join("current.csv")).unwrap(),
        first
    );

    let mut changed = again.clone();
    changed.extend_from_slice(&["--seed", "99"]);
    assert_eq!(lrchain(&changed).status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn flags_override_config_file() {
    let dir = scratch("config");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "n = [12]\nw_grid = \"1:10:2\"\nrealizations = 2\n").unwrap();
    let out = dir.join("out");
    let o = lrchain(&[
        "--config",
        cfg.to_str().unwrap(),
        "current",
        "--n",
        "14",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out.join("current.csv"));
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[1] == "14"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn configuration_errors_exit_2() {
    assert_eq!(
        lrchain(&["current", "--w-grid", "1:x:3"]).status.code(),
        Some(2)
    );
    assert_eq!(
        lrchain(&["current", "--realizations", "2", "--budget", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(lrchain(&["nonsense"]).status.code(), Some(2));

    let dir = scratch("badcfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "gama = 1.0\n").unwrap();
    assert_eq!(
        lrchain(&["--config", cfg.to_str().unwrap(), "thresholds"])
            .status
            .code(),
        Some(2)
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn spreading_starts_from_a_point() {
    let dir = scratch("dynamics");
    let o = lrchain(&[
        "dynamics",
        "--n",
        "41",
        "--w",
        "1",
        "--realizations",
        "1",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.join("dynamics_m0_w0.csv"));
    let t0: f64 = r[0][0].parse().unwrap();
    let v0: f64 = r[0][1].parse().unwrap();
    assert_eq!(t0, 0.0);
    assert!(v0.abs() < 1e-20);
    let v1: f64 = r[1][1].parse().unwrap();
    assert!(v1 > 0.0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn thresholds_table() {
    let dir = scratch("thresholds");
    let o = lrchain(&[
        "thresholds",
        "--n",
        "10000",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("W1") && text.contains("W_gap"));
    assert!(dir.join("thresholds.csv").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn oracle_check_agrees_on_small_chains() {
    let dir = scratch("oracle");
    let o = lrchain(&[
        "oracle-check",
        "--n",
        "4,8",
        "--w-grid",
        "1e-1:1e3:3",
        "--realizations",
        "2",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&dir.join("oracle.csv")).len(), 12);
    let _ = std::fs::remove_dir_all(&dir);
}
