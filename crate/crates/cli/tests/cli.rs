use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 6] = ["--set", "x_max=160", "--set", "n_points=4001", "--set", "samples=8"];

fn traversal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_traversal"))
        .args(args)
        .output()
        .expect("failed to launch traversal")
}

fn run_in(dir: &Path, cmd: &str, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![cmd, "--out", out];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    traversal(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn help_lists_every_key_with_units() {
    let o = traversal(&["figure2", "--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for key in [
        "x0",
        "p0",
        "var_x",
        "barrier_left",
        "barrier_height",
        "sigma1",
        "sigma2",
        "n_points",
        "dt",
        "samples",
        "t_detect",
        "t_end",
        "tau_spacing",
        "zero_transmission",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
    assert!(text.contains("[length]") && text.contains("[energy]") && text.contains("[time]"));
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "figure1", &["--set", "sigmma=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigmma"));

    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# sweep\ndt = 0.002\nbogus_key = 3\n").unwrap();
    let o = run_in(dir.path(), "figure1", &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus_key"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    let o = run_in(dir.path(), "single", &["--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = run_in(dir.path(), "single", &["--set", "dt=abc"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run_in(dir.path(), "single", &["--set", "t_end=5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = run_in(dir.path(), "single", &["--set", "d=1,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`d`"));

    let o = traversal(&["figure1", "--workers", "many"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_output_dir_exits_3_unless_created() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("a/b");
    let o = run_in(&target, "single", &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!target.exists());

    let o = run_in(&target, "single", &["--create"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("single.csv").is_file());
}

#[test]
fn config_file_then_overrides_last_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "samples = 4   # coarse\nsigma = 2.0\n").unwrap();
    let o = run_in(
        dir.path(),
        "single",
        &["--config", cfg.to_str().unwrap(), "--set", "sigma=3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("single.json")).unwrap()).unwrap();
    assert_eq!(side["scenario"]["samples"], 8);
    assert_eq!(side["extra"]["detector"]["sigma"], 3.0);
}

#[test]
fn single_writes_normalised_density() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "single", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("mean_tau") && stdout.contains("tau_T"));

    let (header, rows) = read_csv(&dir.path().join("single.csv"));
    assert_eq!(header, ["tau", "density"]);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    let mass: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    assert!(pts.iter().all(|&(_, p)| p >= 0.0));

    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("single.json")).unwrap()).unwrap();
    assert_eq!(side["command"], "single");
    assert!(side["dx"].as_f64().unwrap() > 0.0);
}

#[test]
fn figure1_and_figure2_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "figure1", &["--set", "s=1", "--set", "sigma=1, 4.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("figure1.csv"));
    assert_eq!(header, ["s", "sigma", "dq_mean_p", "delta_dq", "efficiency", "status"]);
    assert_eq!(rows.len(), 2);
    let sigma: f64 = rows[1][1].parse().unwrap();
    assert_eq!(sigma, 4.5);
    assert!(rows.iter().all(|r| r[5] == "ok"));
    assert!(dir.path().join("figure1.json").is_file());

    let o = run_in(dir.path(), "figure2", &["--set", "d=0.5", "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("figure2.csv"));
    assert_eq!(
        header,
        [
            "d",
            "tau1",
            "tau2",
            "tau_T",
            "p_b_given_a_1",
            "p_b_given_a_2",
            "clip_frac_1",
            "clip_frac_2",
            "status"
        ]
    );
    assert_eq!(rows.len(), 1);
    let tau1: f64 = rows[0][1].parse().unwrap();
    let tau2: f64 = rows[0][2].parse().unwrap();
    assert!(tau1 > 0.0 && tau2 > 0.0);
}

#[test]
fn opaque_barrier_is_all_reflected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "single", &["--set", "barrier_height=200", "--set", "d=5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("all-reflected"));
}
