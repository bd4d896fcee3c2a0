use std::path::Path;
use std::process::{Command, Output};

use bmo_extension::field::{Grid, ScalarField, VectorField};
use bmo_extension::geometry::{Domain, Vec2};
use bmo_extension::io::{load_scalar, load_vector, save_scalar, save_vector};

fn bmoext(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmoext")).arg("--out").arg(dir).args(args).output().expect("spawn bmoext")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn half_plane_field(dir: &Path) -> std::path::PathBuf {
    let g = Grid::new(-1.0, -1.0, 1.0 / 16.0, 32, 32).unwrap();
    let f = ScalarField::sample_in(g, &Domain::half_plane(), |p| (3.0 * p.x).sin() + p.y).unwrap();
    let path = dir.join("v.fld");
    save_scalar(&path, &f).unwrap();
    path
}

#[test]
fn extend_writes_field_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let input = half_plane_field(dir.path());
    let out = bmoext(dir.path(), &["extend", input.to_str().unwrap(), "--rho", "0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["rho"], 0.2);
    assert_eq!(summary["interpolation_failures"], 0);
    let ext = load_scalar(&dir.path().join("extended.fld")).unwrap();
    let v = load_scalar(&input).unwrap();
    assert_eq!(ext.masked_count(), ext.grid.len());
    for k in 0..v.grid.len() {
        if let Some(x) = v.at(k) {
            assert_eq!(ext.at(k), Some(x));
        }
    }
    assert!(dir.path().join("extend.json").exists());
}

#[test]
fn vextend_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new(-1.0, -1.0, 1.0 / 16.0, 32, 32).unwrap();
    let u = VectorField::sample_in(g, &Domain::half_plane(), |p| Vec2::new(p.y, 1.0 + p.x)).unwrap();
    let input = dir.path().join("u.fld");
    save_vector(&input, &u).unwrap();
    let out = bmoext(dir.path(), &["vextend", input.to_str().unwrap(), "--rho", "0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ext = load_vector(&dir.path().join("vextended.fld")).unwrap();
    assert_eq!(ext.grid(), g);
}

#[test]
fn seminorm_oracle_matches_exhaustive_search() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new(-0.5, -0.25, 1.0 / 16.0, 16, 16).unwrap();
    let f = ScalarField::sample_in(g, &Domain::half_plane(), |p| p.x.signum() + p.y).unwrap();
    let input = dir.path().join("f.fld");
    save_scalar(&input, &f).unwrap();
    let value = |extra: &[&str]| {
        let mut args = vec!["seminorm", input.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = bmoext(dir.path(), &args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        (v["value"].as_f64().unwrap(), v["oracle"].as_bool().unwrap())
    };
    let (a, oracle_a) = value(&[]);
    let (b, oracle_b) = value(&["--oracle"]);
    assert!(!oracle_a && oracle_b);
    assert_eq!(a, b);
    assert!(a > 0.0);
}

#[test]
fn partition_reports_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = bmoext(dir.path(), &["partition", "--rho", "0.25", "--bbox", "-2,2,-1,1", "--at", "0.1,0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let total: f64 = v["weights"][0]["weights"].as_array().unwrap().iter().map(|w| w.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(v["max_neighbors"].as_u64().unwrap() <= 1152);
    assert!(dir.path().join("atlas.json").exists());
}

#[test]
fn domain_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("disk.toml");
    std::fs::write(&cfg, "shape = \"disk\"\nepsilon = 0.1\n[parameters]\ncenter = [0.0, 0.0]\nradius = 1.0\n").unwrap();
    let out =
        bmoext(dir.path(), &["--config", cfg.to_str().unwrap(), "partition", "--rho", "0.2", "--bbox", "-2,2,-2,2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["seeds"].as_u64().unwrap() > 8);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bmoext(dir.path(), &["extend"]).status.code(), Some(2));
    assert_eq!(bmoext(dir.path(), &["no-such-command"]).status.code(), Some(2));
    let missing = bmoext(dir.path(), &["extend", "missing.fld", "--rho", "0.1"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    assert_eq!(bmoext(dir.path(), &["verify", "--check", "nope"]).status.code(), Some(2));
}

#[test]
fn coarse_log_layer_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = bmoext(dir.path(), &["example-log", "--h", "1/64"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["support_ok"], true);
    assert!(dir.path().join("example_log.json").exists());
}

#[test]
fn verify_is_deterministic_and_reports_forced_failure() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "3", "verify", "--check", "reflection", "--check", "restriction"];
    let first = bmoext(dir.path(), &args);
    assert_eq!(first.status.code(), Some(0), "{}", stdout(&first));
    let report = std::fs::read(dir.path().join("verify.json")).unwrap();
    let second = bmoext(dir.path(), &args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(report, std::fs::read(dir.path().join("verify.json")).unwrap());

    let broken = bmoext(dir.path(), &["verify", "--epsilon", "1e-15", "--check", "chart_bounds"]);
    assert_eq!(broken.status.code(), Some(1));
    assert!(stdout(&broken).starts_with("FAIL chart_bounds"));
}

#[test]
fn experiment_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
id = "small"
rhos = [0.1, 0.2]
mu = 1.0
delta = 1.0
gamma = 0.5
out_dir = "run"

[domain]
shape = "half_plane"
parameters = {}

[grid]
x0 = -1.0
x1 = 1.0
y0 = -0.5
y1 = 1.0
h = 0.0625
"#,
    )
    .unwrap();
    let out = bmoext(dir.path(), &["--config", cfg.to_str().unwrap(), "experiment"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run/ratios.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 7);
    assert!(stdout(&out).contains("zero           no fit (0 points)"));
}
