use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value as Json;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_phonon-forge");

fn run(dir: &Path, kind: &str, config: &str, extra: &[&str]) -> Output {
    let path = dir.join(format!("{kind}-{}.toml", fastish_hash(config)));
    fs::write(&path, config).unwrap();
    Command::new(BIN)
        .arg(kind)
        .arg("--config")
        .arg(&path)
        .args(extra)
        .env("PHONON_FORGE_CACHE", dir.join("default-cache"))
        .output()
        .unwrap()
}

fn fastish_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn manifest(out: &Path) -> Json {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn cavity_config(n: usize, cache_dir: &Path, walls: &str) -> String {
    format!(
        r#"
[run]
cache_dir = "{}"

[array]
species = "Ca40"
n_ions = {n}
spacing_um = 7.0

[cavity]
n_system = 2
walls = 1
tweezer = "3.0 MHz x2pi"
wall_thickness = {walls}
"#,
        cache_dir.display()
    )
}

const SINGLE: &str = r#"
[array]
species = "Ca40"
spacing_um = 7.0

[singlemode]
omega = "2.0 w0"
kappa = "6.1e-3 w0"
n_th = 10.0
eta_omega = { start = 0.05, stop = 0.6, count = 12, unit = "w0" }
lineshape = ["0.2 w0", "0.4 w0"]
lineshape_points = 41
"#;

const TWO: &str = r#"
[array]
species = "Ca40"
spacing_um = 7.0

[twomode]
omega_com = "1.6 w0"
kappa_com = "0.05 w0"
omega_br = "2.5 w0"
kappa_br = "0.01 w0"
n_th_com = 13.0
n_th_br = 8.15
gamma = "43.2 w0"
eta_omega = "1.0 w0"
initial = [[0.5, 0.5], [50.0, 0.5]]
t_max = 300.0
"#;

fn csv_files(out: &Path) -> Vec<PathBuf> {
    let mut v: Vec<_> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    for (kind, cfg) in [("single-mode", SINGLE), ("two-mode", TWO)] {
        let (a, b) = (dir.path().join(format!("{kind}-a")), dir.path().join(format!("{kind}-b")));
        ok(&run(dir.path(), kind, cfg, &["--out", a.to_str().unwrap(), "--jobs", "1"]));
        ok(&run(dir.path(), kind, cfg, &["--out", b.to_str().unwrap(), "--jobs", "3"]));
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        }
        assert_eq!(
            fs::read(a.join("summary.json")).unwrap(),
            fs::read(b.join("summary.json")).unwrap()
        );
    }
}

#[test]
fn outputs_carry_provenance_and_are_all_listed() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sm");
    ok(&run(dir.path(), "single-mode", SINGLE, &["--out", out.to_str().unwrap()]));
    let m = manifest(&out);
    let hash = m["config_hash"].as_str().unwrap().to_string();
    let w0 = m["omega0_rad_s"].as_f64().unwrap();
    assert!((w0 / (2.0 * std::f64::consts::PI * 0.5067e6) - 1.0).abs() < 1e-3);
    let mut listed: Vec<String> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().to_string())
        .collect();
    let mut present: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    listed.sort();
    present.sort();
    assert_eq!(listed, present);
    for f in csv_files(&out) {
        let text = fs::read_to_string(&f).unwrap();
        let head: Vec<&str> = text.lines().take(4).collect();
        assert!(head.iter().any(|l| l.starts_with("# omega0 = ") && l.ends_with("rad/s")));
        assert!(head.iter().any(|l| l.starts_with("# units: ")));
        assert!(head.iter().any(|l| *l == format!("# config_hash = {hash}")));
    }
    let summary: Json = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_hash"], m["config_hash"]);
    assert_eq!(summary["omega0_rad_s"], m["omega0_rad_s"]);
    assert!(summary["units"].is_string());
}

#[test]
fn config_hash_ignores_key_order() {
    let dir = TempDir::new().unwrap();
    let reordered = r#"
[singlemode]
lineshape_points = 41
lineshape = ["0.2 w0", "0.4 w0"]
eta_omega = { unit = "w0", count = 12, stop = 0.6, start = 0.05 }
n_th = 10.0
kappa = "6.1e-3 w0"
omega = "2.0 w0"

[array]
spacing_um = 7.0
species = "Ca40"
"#;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&run(dir.path(), "single-mode", SINGLE, &["--out", a.to_str().unwrap()]));
    ok(&run(dir.path(), "single-mode", reordered, &["--out", b.to_str().unwrap()]));
    assert_eq!(manifest(&a)["config_hash"], manifest(&b)["config_hash"]);
    assert_eq!(fs::read(a.join("scan.csv")).unwrap(), fs::read(b.join("scan.csv")).unwrap());
}

fn assert_nothing_written(dir: &Path, out: &Path) {
    assert!(!out.exists(), "{} was created", out.display());
    for e in fs::read_dir(dir).unwrap() {
        let name = e.unwrap().file_name().to_string_lossy().into_owned();
        assert!(!name.contains("staging"), "leftover {name}");
    }
}

#[test]
fn negative_kappa_is_a_config_error_without_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bad");
    let cfg = SINGLE.replace("kappa = \"6.1e-3 w0\"", "kappa = \"-6.1e-3 w0\"");
    let o = run(dir.path(), "single-mode", &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("singlemode.kappa"));
    assert_nothing_written(dir.path(), &out);
}

#[test]
fn schema_violations_name_the_field() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bad");
    let cases = [
        (SINGLE.replace("n_th = 10.0", "n_th = 10.0\nnth = 3"), "singlemode.nth"),
        (SINGLE.replace("\"2.0 w0\"", "\"1.0 MHz\""), "singlemode.omega"),
        (SINGLE.replace("count = 12", "count = 0"), "singlemode.eta_omega.count"),
        (SINGLE.replace("species = \"Ca40\"\n", ""), "array.species"),
        (format!("[run]\nkind = \"two-mode\"\n{SINGLE}"), "run.kind"),
        (TWO.replace("eta_omega = \"1.0 w0\"\n", ""), "twomode.eta_omega"),
    ];
    for (cfg, field) in cases {
        let kind = if cfg.contains("[twomode]") { "two-mode" } else { "single-mode" };
        let o = run(dir.path(), kind, &cfg, &["--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{field}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "{field}: {err}");
        assert_nothing_written(dir.path(), &out);
    }
}

#[test]
fn numerical_failure_exits_with_three_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bad");
    // An undriven, empty mode has no defined second-order coherence.
    let cfg = SINGLE
        .replace("n_th = 10.0", "n_th = 0.0")
        .replace("{ start = 0.05, stop = 0.6, count = 12, unit = \"w0\" }", "[\"0.0 w0\"]");
    let o = run(dir.path(), "single-mode", &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_nothing_written(dir.path(), &out);
}

#[test]
fn cache_is_transparent_and_survives_corruption() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("cache");
    let cfg = cavity_config(400, &cache, "[1, 2]");
    let outs: Vec<PathBuf> = (0..4).map(|i| dir.path().join(format!("o{i}"))).collect();
    let arg = |i: usize| outs[i].to_str().unwrap().to_string();

    ok(&run(dir.path(), "cavity-design", &cfg, &["--out", &arg(0)]));
    assert_eq!(manifest(&outs[0])["cache"]["misses"], 2);
    ok(&run(dir.path(), "cavity-design", &cfg, &["--out", &arg(1)]));
    assert_eq!(manifest(&outs[1])["cache"]["hits"], 2);
    ok(&run(dir.path(), "cavity-design", &cfg, &["--out", &arg(2), "--no-cache"]));
    assert_eq!(manifest(&outs[2])["cache"]["enabled"], false);

    // Bump the stored format version of one entry and truncate the other.
    let mut entries: Vec<_> = fs::read_dir(&cache).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    assert_eq!(entries.len(), 2);
    let mut bytes = fs::read(&entries[0]).unwrap();
    bytes[4] = bytes[4].wrapping_add(1);
    fs::write(&entries[0], bytes).unwrap();
    let bytes = fs::read(&entries[1]).unwrap();
    fs::write(&entries[1], &bytes[..bytes.len() / 2]).unwrap();

    let o = run(dir.path(), "cavity-design", &cfg, &["--out", &arg(3)]);
    ok(&o);
    assert_eq!(manifest(&outs[3])["cache"]["misses"], 2);

    let reference = fs::read(outs[0].join("cavity_design.csv")).unwrap();
    for out in &outs[1..] {
        assert_eq!(fs::read(out.join("cavity_design.csv")).unwrap(), reference);
    }
    let rows = String::from_utf8(reference).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 2);
}

#[test]
fn cached_design_is_ten_times_faster() {
    let dir = TempDir::new().unwrap();
    let cfg = cavity_config(2000, &dir.path().join("cache"), "[2]");
    let timed = |name: &str| {
        let out = dir.path().join(name);
        let t0 = Instant::now();
        ok(&run(dir.path(), "cavity-design", &cfg, &["--out", out.to_str().unwrap()]));
        t0.elapsed().as_secs_f64()
    };
    let first = timed("cold");
    let second = timed("warm");
    assert!(first >= 10.0 * second, "cold {first:.2}s, warm {second:.2}s");
}
