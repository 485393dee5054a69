//! End-to-end runs of the `nphoton` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

/// First zero of J1 over 2 pi.
const RAYLEIGH: f64 = 3.831_705_970_207_512_3 / std::f64::consts::TAU;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn nphoton(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nphoton"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str], out: &Path) {
    let o = nphoton(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Header and numeric rows; empty cells become `None`.
fn csv(path: &Path) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.ends_with("\r\n"), "{} lacks CRLF line endings", path.display());
    let mut lines = text.split("\r\n").filter(|l| !l.is_empty());
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| if c.is_empty() { None } else { Some(c.parse::<f64>().unwrap()) })
                .collect()
        })
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<Option<f64>>], name: &str) -> Vec<Option<f64>> {
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k]).collect()
}

fn write_scenario(dir: &Path, base: &str, edit: impl Fn(String) -> String) -> PathBuf {
    let text = edit(fs::read_to_string(scenario(base)).unwrap());
    let path = dir.join(base);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn psf_columns_and_airy_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("psf");
    run_ok(&["psf", "--config", scenario("two_point.toml").to_str().unwrap()], &out);
    let (header, rows) = csv(&out.join("psf.csv"));
    assert_eq!(header, ["rho2_x", "intensity"]);
    let xs: Vec<f64> = column(&header, &rows, "rho2_x").into_iter().map(Option::unwrap).collect();
    assert!(xs.windows(2).all(|w| w[1] > w[0]));
    assert!(column(&header, &rows, "intensity").iter().all(|v| v.unwrap() >= 0.0));

    let summary = json(&out.join("psf.json"));
    // f = 10 cm, d1 = 10 m, d2 = 1 mm, N = 3: D = d2 + d1 / 3, L2 from the thin lens
    let d = 1e-3 + 10.0 / 3.0;
    let l2 = 1.0 / (1.0 / 0.1 - 1.0 / d);
    let airy = RAYLEIGH * 1e-6 * l2 / 1e-2;
    let reported = summary["airy_radius"].as_f64().unwrap();
    assert!((reported - airy).abs() < 1e-9 * airy);
    let measured = summary["measured_zero_radius"].as_f64().unwrap();
    assert!((measured - airy).abs() < 1e-3 * airy, "measured {measured}, expected {airy}");

    let (h, table) = csv(&out.join("airy_table.csv"));
    let n = column(&h, &table, "n_degenerate");
    let a_m = column(&h, &table, "min_separation");
    assert_eq!(n.iter().map(|v| v.unwrap() as u32).collect::<Vec<_>>(), [1, 2, 3]);
    for (k, a) in a_m.iter().enumerate() {
        let expect = a_m[0].unwrap() * (1e-3 + 10.0 / (k + 1) as f64) / (1e-3 + 10.0);
        assert!((a.unwrap() - expect).abs() < 1e-3 * expect);
    }
}

#[test]
fn both_engines_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("both");
    run_ok(&["psf", "--engine", "both", "--config", scenario("two_point.toml").to_str().unwrap()], &out);
    let (header, rows) = csv(&out.join("psf.csv"));
    let a = column(&header, &rows, "intensity");
    let b = column(&header, &rows, "intensity_numeric");
    let peak = a.iter().map(|v| v.unwrap()).fold(0.0, f64::max);
    for (x, y) in a.iter().zip(&b) {
        assert!((x.unwrap() - y.unwrap()).abs() <= 1e-3 * peak);
    }
    let dev = json(&out.join("psf.json"))["max_relative_deviation"].as_f64().unwrap();
    assert!(dev <= 1e-3);
}

#[test]
fn negative_distance_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "two_point.toml", |t| t.replace("d1 = \"10 m\"", "d1 = \"-10 m\""));
    let o = nphoton(&["psf", "--config", path.to_str().unwrap()], &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("d1"), "{err}");
    assert!(err.contains("two_point.toml:7:"), "{err}");
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn missing_unit_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "two_point.toml", |t| t.replace("R = \"1 cm\"", "R = \"1\""));
    let o = nphoton(&["psf", "--config", path.to_str().unwrap()], &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("R"));
}

#[test]
fn resolution_gain_follows_n() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("resolve");
    run_ok(&["resolve", "--config", scenario("two_point.toml").to_str().unwrap()], &out);
    let (header, rows) = csv(&out.join("gain.csv"));
    let n = column(&header, &rows, "n_degenerate");
    let gain = column(&header, &rows, "gain_vs_classical");
    assert_eq!(gain[0], None);
    for (n, g) in n.iter().zip(&gain).skip(1) {
        let (n, g) = (n.unwrap(), g.unwrap());
        assert!((g - n).abs() <= 0.01 * n, "N = {n}: gain {g}");
    }
    for e in column(&header, &rows, "relative_error") {
        assert!(e.unwrap() <= 5e-3);
    }
    let report = json(&out.join("resolution.json"));
    assert!(report.is_object() || report.is_array());
}

#[test]
fn ancilla_arm_limit_is_classical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("anc");
    run_ok(&["resolve", "--config", scenario("ancilla_arm.toml").to_str().unwrap()], &out);
    let (header, rows) = csv(&out.join("gain.csv"));
    let a = column(&header, &rows, "measured_a_m");
    assert!(a.iter().all(|v| v.unwrap() == a[0].unwrap()));
    let (h, airy) = csv(&out.join("airy.csv"));
    let n = column(&h, &airy, "n_degenerate");
    let ratio = column(&h, &airy, "measured_ratio");
    for (n, r) in n.iter().zip(&ratio) {
        // the shrink is 1/N up to the d2' term of the effective distance
        assert!((r.unwrap() * n.unwrap() - 1.0).abs() < 1e-2);
    }
}

#[test]
fn resolve_without_sweep_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "two_point.toml", |t| t[..t.find("[sweep]").unwrap()].to_owned());
    let o = nphoton(&["resolve", "--config", path.to_str().unwrap()], &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep"));
}

#[test]
fn speckle_rejects_single_realization() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "speckle.toml", |t| t.replace("realizations = 2000", "realizations = 1"));
    let o = nphoton(&["speckle", "--config", path.to_str().unwrap()], &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("realizations"));
}

#[test]
fn speckle_matches_closed_form_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "speckle.toml", |t| t.replace("realizations = 2000", "realizations = 400"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["speckle", "--config", path.to_str().unwrap()], &a);
    run_ok(&["speckle", "--jobs", "1", "--config", path.to_str().unwrap()], &b);
    let summary = json(&a.join("speckle.json"));
    assert!(summary["within_3se_fraction"].as_f64().unwrap() >= 0.95);
    let v = summary["monte_carlo"]["visibility"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&v));
    for f in ["speckle.csv", "speckle.json", "manifest.json", "scenario.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    run_ok(&["speckle", "--seed", "5", "--config", path.to_str().unwrap()], &c);
    assert_ne!(fs::read(a.join("speckle.csv")).unwrap(), fs::read(c.join("speckle.csv")).unwrap());
}

#[test]
fn validate_passes_on_builtin_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nphoton(&["validate"], &tmp.path().join("v"));
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("disk_integral"));
    assert!(!table.contains("FAIL"));
}

#[test]
fn validate_flags_coarse_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "two_point.toml", |t| {
        t.replace("[sweep]", "[grid]\nstart = \"-20 um\"\npitch = \"5 um\"\nsamples = 9\n\n[sweep]")
    });
    let o = nphoton(&["validate", "--config", path.to_str().unwrap()], &tmp.path().join("v"));
    assert_eq!(o.status.code(), Some(1));
    let table = String::from_utf8_lossy(&o.stdout);
    let line = table.lines().find(|l| l.starts_with("sampling")).expect("sampling row");
    assert!(line.contains("two-point") && line.contains("FAIL"), "{line}");
}

#[test]
fn canonical_scenario_reproduces_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["image", "--config", scenario("two_point.toml").to_str().unwrap()], &a);
    run_ok(&["image", "--config", a.join("scenario.toml").to_str().unwrap()], &b);
    let (ma, mb) = (json(&a.join("manifest.json")), json(&b.join("manifest.json")));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(fs::read(a.join("image.csv")).unwrap(), fs::read(b.join("image.csv")).unwrap());
}

#[test]
fn manifest_checksums_and_finite_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario("two_point.toml");
    for cmd in ["psf", "image", "resolve", "sweep"] {
        let out = tmp.path().join(cmd);
        run_ok(&[cmd, "--config", cfg.to_str().unwrap()], &out);
        let manifest = json(&out.join("manifest.json"));
        assert_eq!(manifest["command"], cmd);
        assert_eq!(manifest["created"], "2023-11-14T22:13:20Z");
        let files = manifest["files"].as_array().unwrap();
        let mut listed: Vec<String> = files.iter().map(|f| f["path"].as_str().unwrap().to_owned()).collect();
        for f in files {
            let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
            assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
            assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        }
        let mut on_disk: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "manifest.json")
            .collect();
        listed.sort();
        on_disk.sort();
        assert_eq!(listed, on_disk);
        for name in on_disk.iter().filter(|n| n.ends_with(".csv")) {
            let (_, rows) = csv(&out.join(name));
            assert!(rows.iter().flatten().flatten().all(|v| v.is_finite()), "{cmd}/{name}");
        }
    }
}
