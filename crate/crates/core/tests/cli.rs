//! End-to-end runs of the binary: exit codes, artifacts and determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_glass-pnp");

const FLAT: &str = r#"
[physics]
nu = 0.3
phi = 1.0

[domain]
kind = "flat"
l = 4.0
thickness = 1.0

[grid]
n_periodic = 8
n_cheb = 21

[output]
trajectories = 3
cumulative_samples = 11
"#;

const WEDGE: &str = r#"
[physics]
nu = 0.2
phi = 1.0

[domain]
kind = "wedge"
h_min = 0.4
beta = 0.15707963267948966

[grid]
n_periodic = 12
n_cheb = 31
"#;

fn run(mode: &str, config: &str, dir: &Path, extra: &[&str]) -> (i32, String) {
    fs::create_dir_all(dir).unwrap();
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let res = Command::new(BIN)
        .arg(mode)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .env("GLASS_PNP_WORKERS", "1")
        .output()
        .unwrap();
    (res.status.code().unwrap(), String::from_utf8_lossy(&res.stderr).into_owned())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn check_csv(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'), "{}", path.display());
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    for col in header.split(',') {
        assert!(col.contains('[') && col.ends_with(']'), "missing unit in {col:?}");
    }
    let width = header.split(',').count();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), width);
        for c in cells {
            let mantissa = c.split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(|d| d.is_ascii_digit()).count(), 17, "{c}");
            c.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn conformal_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run("solve-conformal", FLAT, dir.path(), &[]);
    assert_eq!(code, 0, "{err}");
    let out = dir.path().join("out");
    let s = json(&out.join("summary.json"));
    for key in ["Q", "R", "R_block", "iterations", "residual_norm", "L", "nu", "Phi", "grid", "wall_time_s"] {
        assert!(s.get(key).is_some(), "summary lacks {key}");
    }
    let q = s["Q"].as_f64().unwrap();
    assert!((s["R"].as_f64().unwrap() * q - 1.0).abs() < 1e-12);
    // A flat unit layer is its own block reference.
    assert!((s["R_block"].as_f64().unwrap() - s["R"].as_f64().unwrap()).abs() < 1e-8);
    for f in ["fields.csv", "cumulative.csv", "trajectories.csv"] {
        check_csv(&out.join(f));
    }
}

#[test]
fn hodograph_run_on_flat_layer() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run("solve-hodograph", FLAT, dir.path(), &["--seed-grid", "8x41"]);
    assert_eq!(code, 0, "{err}");
    let s = json(&dir.path().join("out/summary.json"));
    assert!((s["L"].as_f64().unwrap() - 4.0).abs() < 1e-8);
    assert_eq!(s["grid"]["n_cheb"], 41);
    check_csv(&dir.path().join("out/trajectories.csv"));
}

#[test]
fn identical_configs_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run("solve-conformal", WEDGE, a.path(), &[]).0, 0);
    assert_eq!(run("solve-conformal", WEDGE, b.path(), &[]).0, 0);
    for f in ["fields.csv", "cumulative.csv", "trajectories.csv"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let mut sa = json(&a.path().join("out/summary.json"));
    let mut sb = json(&b.path().join("out/summary.json"));
    sa["wall_time_s"] = serde_json::Value::Null;
    sb["wall_time_s"] = serde_json::Value::Null;
    assert_eq!(sa, sb);
}

#[test]
fn converge_emits_difference_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{WEDGE}\n[solver]\ntol = 1e-12\n\n[converge]\nformulation = \"conformal\"\nvary = \"cheb\"\ncounts = [7, 11, 15]\n");
    let (code, err) = run("converge", &cfg, dir.path(), &[]);
    assert_eq!(code, 0, "{err}");
    let path = dir.path().join("out/convergence.csv");
    check_csv(&path);
    let text = fs::read_to_string(path).unwrap();
    let dq: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(dq.len(), 3);
    // Published differences: 1.6e-1, 7.6e-3, 3.2e-4.
    for (d, r) in dq.iter().zip([1.6e-1, 7.6e-3, 3.2e-4]) {
        assert!((d / r).log10().abs() < 1.0, "{d} vs {r}");
    }
}

#[test]
fn empty_domain_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[physics]\nnu = 0.2\nphi = 1.0\n[domain]\n";
    let (code, _) = run("solve-conformal", cfg, dir.path(), &[]);
    assert_eq!(code, 1);
    let e = json(&dir.path().join("out/error.json"));
    assert_eq!(e["exit_code"], 1);
    let msg = e["message"].as_str().unwrap();
    assert!(msg.contains("domain.kind") && msg.contains("grid.n_periodic") && msg.contains("grid.n_cheb"), "{msg}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = FLAT.replace("thickness = 1.0", "thickness = 1.0\ncolour = \"blue\"");
    assert_eq!(run("solve-conformal", &cfg, dir.path(), &[]).0, 1);
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{WEDGE}\n[solver]\nmax_iter = 1\ntol = 1e-14\n");
    let (code, _) = run("solve-conformal", &cfg, dir.path(), &[]);
    assert_eq!(code, 2);
    let e = json(&dir.path().join("out/error.json"));
    assert_eq!(e["kind"], "non-convergence");
}

#[test]
fn unwritable_output_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, FLAT).unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let res = Command::new(BIN)
        .args(["solve-conformal", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn wedge_sweep_fits_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[physics]
nu = 0.1
phi = 1.0

[grid]
n_periodic = 24
n_cheb = 25

[sweep]
family = "wedge"
beta = 0.7853981633974483
l = 6.283185307179586
h_min = [0.02, 0.06, 0.2]
"#;
    let (code, err) = run("asymptotic-sweep", cfg, dir.path(), &[]);
    assert_eq!(code, 0, "{err}");
    check_csv(&dir.path().join("out/sweep.csv"));
    let s = json(&dir.path().join("out/summary.json"));
    assert!((s["C"].as_f64().unwrap() + 0.87).abs() < 0.05);
}
