use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sitesel"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn simulate(scenario: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["simulate", scenario, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "seed = 4\n[ensemble]\natoms = 2000\n[selection]\nbootstrap_resamples = 10\n";

#[test]
fn version_flag() {
    let o = bin().arg("--version").output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn negative_rabi_exits_2_with_line_and_no_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "seed = 1\n\n[selection]\nrabi_hz = -2040\n");
    let out = dir.path().join("out");
    let o = simulate("selection", &cfg, &out, &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_key_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[spectrum]\npoint = 3\n");
    let o = simulate("spectrum", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn scenario_mismatch_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "scenario = \"radial\"\n");
    let o = simulate("tradeoff", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_names_exit_2() {
    let o = bin().args(["reproduce", "fig9"]).output().unwrap();
    assert_eq!(code(&o), 2);
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "");
    let o = simulate("nonsense", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn validate_only_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("out");
    let o = simulate("selection", &cfg, &out, &["--validate-only"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn degenerate_selection_exits_3_without_outputs() {
    let dir = TempDir::new().unwrap();
    // resonance far outside the Stark-shifted band
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[ensemble]\natoms = 100\n[selection]\ndetuning_hz = 5e6\nrabi_hz = 10\n",
    );
    let out = dir.path().join("out");
    let o = simulate("selection", &cfg, &out, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn single_atom_selection_is_one_row_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "seed = 12\n[ensemble]\natoms = 1\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&simulate("selection", &cfg, &a, &[])), 0);
    assert_eq!(code(&simulate("selection", &cfg, &b, &[])), 0);
    let atoms = fs::read_to_string(a.join("atoms.csv")).unwrap();
    assert_eq!(atoms.lines().count(), 2, "{atoms}");
    assert_eq!(atoms, fs::read_to_string(b.join("atoms.csv")).unwrap());
}

#[derive(serde::Deserialize)]
struct Manifest {
    seed: u64,
    version: String,
    runs: Vec<toml::Value>,
    outputs: Vec<OutputEntry>,
}

#[derive(serde::Deserialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

fn manifest(dir: &Path) -> Manifest {
    toml::from_str(&fs::read_to_string(dir.join("manifest.toml")).unwrap()).unwrap()
}

#[test]
fn manifest_digests_cover_every_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("out");
    assert_eq!(code(&simulate("fluorescence", &cfg, &out, &["--seed", "9"])), 0);
    let m = manifest(&out);
    assert_eq!(m.seed, 9);
    assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
    let mut listed: Vec<_> = m.outputs.iter().map(|o| o.file.clone()).collect();
    for o in &m.outputs {
        let digest = hex::encode(Sha256::digest(fs::read(out.join(&o.file)).unwrap()));
        assert_eq!(digest, o.sha256, "{}", o.file);
    }
    let mut on_disk: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f.ends_with(".csv"))
        .collect();
    listed.sort();
    on_disk.sort();
    assert_eq!(listed, on_disk);
}

#[test]
fn echoed_config_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "seed = 5\n[tradeoff]\npoints = 6\n[[tradeoff.curves]]\nlabel = \"two\"\npulses = 2\n",
    );
    let first = dir.path().join("first");
    assert_eq!(code(&simulate("tradeoff", &cfg, &first, &[])), 0);
    let m = manifest(&first);
    let echo = toml::to_string(&m.runs[0].get("config").unwrap()).unwrap();
    let cfg2 = write_config(dir.path(), "echo.toml", &echo);
    let second = dir.path().join("second");
    let o = simulate("tradeoff", &cfg2, &second, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m2 = manifest(&second);
    let digests = |m: &Manifest| m.outputs.iter().map(|o| o.sha256.clone()).collect::<Vec<_>>();
    assert_eq!(digests(&m), digests(&m2));
}

#[test]
fn fit_reads_a_tradeoff_table() {
    let dir = TempDir::new().unwrap();
    let body = "[tradeoff]\nratio_min = 1e-6\npoints = 40\n[[tradeoff.curves]]\nlabel = \"2-pulse\"\npulses = 2\n";
    let cfg = write_config(dir.path(), "t.toml", body);
    let t = dir.path().join("t");
    assert_eq!(code(&simulate("tradeoff", &cfg, &t, &[])), 0);

    let from_file = write_config(dir.path(), "f.toml", &format!("{body}[fit]\ninput = \"t/tradeoff.csv\"\n"));
    let a = dir.path().join("a");
    let o = simulate("fit", &from_file, &a, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b = dir.path().join("b");
    assert_eq!(code(&simulate("fit", &cfg, &b, &[])), 0);
    assert_eq!(
        fs::read_to_string(a.join("fits.csv")).unwrap(),
        fs::read_to_string(b.join("fits.csv")).unwrap()
    );
    let fits = fs::read_to_string(a.join("fits.csv")).unwrap();
    let row: Vec<&str> = fits.lines().nth(1).unwrap().split(',').collect();
    let alpha: f64 = row[3].parse().unwrap();
    assert!((alpha - 2.0).abs() < 0.05, "{fits}");
}

#[test]
fn missing_fit_input_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "f.toml", "[fit]\ninput = \"nope.csv\"\n");
    let o = simulate("fit", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn reproduce_writes_figure_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fig4c");
    let o = bin().args(["reproduce", "fig4c", "--out"]).arg(&out).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let scan = fs::read_to_string(out.join("scan.csv")).unwrap();
    assert!(scan.starts_with("offset_m,r,retained_fraction,mean_eta"));
    assert_eq!(scan.lines().count(), 12);
    assert!(out.join("scan_fit.csv").exists());
}
