use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &[&str] = &["--set", "grid.n=8", "--set", "grid.m=12"];

fn hypfield(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypfield"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HYPFIELD_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn meta_value(meta: &str, key: &str) -> String {
    meta.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from sidecar"))
        .to_string()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = hypfield(&["simulate", "--set", "kernel.width=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: config:"), "{}", stderr(&o));
    assert!(stderr(&o).contains("kernel.width"));
}

#[test]
fn parse_errors_report_line_numbers() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# comment\nseed = 2\nno equals sign here\n").unwrap();
    let o = hypfield(&["simulate", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.conf:3:"), "{}", stderr(&o));
}

#[test]
fn inadmissible_kernel_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = hypfield(&["simulate", "--set", "kernel.b=0.9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("integrable"), "{}", stderr(&o));
    let o = hypfield(&["simulate", "--preset", "fig3a"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_preset_and_bad_thread_env() {
    let dir = TempDir::new().unwrap();
    let o = hypfield(&["simulate", "--preset", "fig9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_hypfield"))
        .args(["verify", "--out"])
        .arg(dir.path())
        .env("HYPFIELD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("threads"));
}

#[test]
fn fig3c_preset_materialises_caption_parameters() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["stationary", "--preset", "fig3c"];
    args.extend_from_slice(SMALL);
    let o = hypfield(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = fs::read_to_string(dir.path().join("stationary.meta")).unwrap();
    for (k, v) in [
        ("kernel.family", "exponential"),
        ("kernel.b", "0.1"),
        ("model.alpha", "0.1"),
        ("rate.mu", "10"),
        ("input.i0", "0.1"),
        ("input.sigma", "0.05"),
        ("time.t_end", "2500"),
    ] {
        assert_eq!(meta_value(&meta, k), v, "{k}");
    }
    let csv = fs::read_to_string(dir.path().join("stationary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,i,j,r,theta,V"));
    assert!(lines.all(|l| l.starts_with("inf,")));
    assert_eq!(csv.lines().count(), 1 + 9 * 13);
}

#[test]
fn fig5d_preset_is_gabor_with_noise() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["simulate", "--preset", "fig5d", "--set", "time.t_end=1"];
    args.extend_from_slice(SMALL);
    let o = hypfield(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = fs::read_to_string(dir.path().join("simulate.meta")).unwrap();
    assert_eq!(meta_value(&meta, "kernel.family"), "gabor_b2");
    assert_eq!(meta_value(&meta, "kernel.b"), "0.2");
    assert_eq!(meta_value(&meta, "input.kind"), "zero");
    assert_eq!(meta_value(&meta, "init.kind"), "noise");
    assert!(meta.contains("# preset: fig5d"));
}

#[test]
fn fig4_writes_four_snapshots() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["simulate", "--preset", "fig4"];
    args.extend_from_slice(SMALL);
    let o = hypfield(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let mut times: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    times.dedup();
    assert_eq!(times, vec![100.0, 150.0, 200.0, 250.0]);
    assert!(!csv.contains('\r'));
}

#[test]
fn runs_are_deterministic_across_threads_and_sidecars() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    let mut args = vec!["simulate", "--preset", "fig8c", "--set", "time.t_end=20", "--set", "seed=5"];
    args.extend_from_slice(SMALL);
    let mut one = args.clone();
    one.extend_from_slice(&["--set", "threads=1"]);
    assert!(hypfield(&one, a.path()).status.success());
    let mut two = args.clone();
    two.extend_from_slice(&["--set", "threads=2"]);
    assert!(hypfield(&two, b.path()).status.success());
    let first = fs::read(a.path().join("simulate.csv")).unwrap();
    assert_eq!(first, fs::read(b.path().join("simulate.csv")).unwrap());

    // The sidecar alone reproduces the run.
    let meta = a.path().join("simulate.meta");
    let o = hypfield(&["simulate", "--config", meta.to_str().unwrap()], c.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(first, fs::read(c.path().join("simulate.csv")).unwrap());
}

#[test]
fn numerical_failure_exits_one() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["simulate", "--preset", "fig3c", "--set", "ode.max_steps=2"];
    args.extend_from_slice(SMALL);
    let o = hypfield(&args, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: numerical:"), "{}", stderr(&o));
}

#[test]
fn homogeneous_needs_constant_input() {
    let dir = TempDir::new().unwrap();
    let o = hypfield(&["homogeneous", "--preset", "fig3c"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = hypfield(
        &[
            "homogeneous",
            "--set",
            "input.kind=constant",
            "--set",
            "time.t_end=5",
            "--set",
            "homogeneous.samples=6",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("homogeneous.csv")).unwrap();
    assert!(csv.starts_with("t,V\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn bump_curve_sweeps_amplitudes() {
    let dir = TempDir::new().unwrap();
    let o = hypfield(
        &["bump-curve", "--preset", "fig2", "--set", "bump.curve_points=20"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for a in ["0", "0.02", "0.04", "0.06", "0.08", "0.1"] {
        let csv = fs::read_to_string(dir.path().join(format!("bump-curve-I{a}.csv"))).unwrap();
        assert!(csv.starts_with("omega,N,M,I\n"));
        assert_eq!(csv.lines().count(), 21);
    }
}

#[test]
fn bump_profile_and_stability() {
    let dir = TempDir::new().unwrap();
    let narrow = [
        "--set",
        "bump.omega_min=0.1",
        "--set",
        "bump.omega_max=0.3",
        "--set",
        "bump.scan_samples=40",
    ];
    let mut args = vec!["bump-profile", "--preset", "fig6a"];
    args.extend_from_slice(&narrow);
    let o = hypfield(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("bump-profile.csv")).unwrap();
    assert!(csv.starts_with("r,V\n"));

    let mut args = vec!["bump-stability", "--preset", "fig6b", "--set", "bump.n_max=4"];
    args.extend_from_slice(&narrow);
    let o = hypfield(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("bump-stability.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,beta_n");
    assert_eq!(lines.len(), 1 + 5 + 1);
    assert!(lines[6] == "verdict,stable" || lines[6] == "verdict,unstable");
}

#[test]
fn verify_passes() {
    let dir = TempDir::new().unwrap();
    let o = hypfield(&["verify"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(csv.starts_with("check,main_value,oracle_value,rel_err,tol,pass\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}
