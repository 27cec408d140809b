use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).env_remove("LAB_THREADS").output().expect("lab runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_config(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lab(&args)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn shipped_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn list_families_names_every_family() {
    let out = lab(&["list-families"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "figure1",
        "figure1-striped",
        "rectangle",
        "stripe",
        "quadrants",
        "tensor-sum",
        "roof",
        "slanted-roof",
        "bifurcation",
        "diffuse",
        "counterexample",
        "quadrant-stack",
    ] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)), "missing {name}");
    }
}

#[test]
fn figure1_atoms_table_has_seven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", "[experiment]\nname = atoms\n[field]\nfamily = figure1\nnodes = 513\n");
    let out = run_config(&cfg, &dir.path().join("out"), &["--svg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let header = fs::read_to_string(dir.path().join("out/atoms.csv")).unwrap();
    assert!(header.starts_with("x1,x2,mass,cells_merged\n"));
    let rows = csv_rows(&dir.path().join("out/atoms.csv"));
    assert_eq!(rows.len(), 7);
    let mut masses: Vec<i32> = rows.iter().map(|r| r[2].parse::<f64>().unwrap() as i32).collect();
    masses.sort();
    assert_eq!(masses, vec![-1, -1, -1, -1, 1, 1, 2]);
    let svg = fs::read_to_string(dir.path().join("out/atoms.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 8, "seven markers plus one double ring");
}

#[test]
fn tensor_sum_sweep_is_identically_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&shipped_configs().join("energy_sweep.cfg"), dir.path(), &[]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("energy.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[1] == "0"));
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shipped_configs().join("quantization.cfg");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_config(&cfg, &a, &["--threads", "2"]).status.success());
    assert!(run_config(&cfg, &b, &[]).status.success());
    let mut compared = 0;
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "metadata.json" {
            continue;
        }
        assert!(fs::read(a.join(&name)).unwrap() == fs::read(b.join(&name)).unwrap(), "{name:?} differs");
        compared += 1;
    }
    assert!(compared >= 2);
}

#[test]
fn thread_override_reaches_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shipped_configs().join("atoms.cfg");
    let out = Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .env("LAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["threads"], 1);
    let report = fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(!report.contains("seconds"));
}

#[test]
fn malformed_config_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.cfg",
        "[experiment]\nname = energy-sweep\n[field]\nfamily = roof\n[schedules]\neps = 0.1, 0.2\n",
    );
    let out = run_config(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));
}

#[test]
fn failed_invariant_exits_one() {
    // 64 atoms spaced 0.025 apart look like a line at these scales
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dim.cfg",
        "[experiment]\nname = dimension-profile\n[field]\nfamily = diffuse\nnodes = 257\n[schedules]\nscales = 0.5, 0.25, 0.125, 0.0625\n",
    );
    let out = run_config(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn shipped_configs_pass() {
    let dir = tempfile::tempdir().unwrap();
    let mut n = 0;
    for entry in fs::read_dir(shipped_configs()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "cfg") {
            let out = run_config(&p, &dir.path().join(p.file_stem().unwrap()), &[]);
            assert!(
                out.status.success(),
                "{}: {}{}",
                p.display(),
                String::from_utf8_lossy(&out.stdout),
                String::from_utf8_lossy(&out.stderr)
            );
            n += 1;
        }
    }
    assert!(n >= 9);
}
