mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heatflux(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatflux"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn catalog_path(rel: &str) -> String {
    common::catalog_dir().join(rel).to_string_lossy().into_owned()
}

#[test]
fn catalog_run_passes_and_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let dir = catalog_path("");
    let first = heatflux(&["run", &dir], a.path());
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stdout));
    assert_eq!(heatflux(&["run", &dir, "--jobs", "1"], b.path()).status.code(), Some(0));
    let csv_a = fs::read(a.path().join("catalog.csv")).unwrap();
    let csv_b = fs::read(b.path().join("catalog.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b);
}

#[test]
fn single_case_writes_csv_and_json() {
    let out = tempfile::tempdir().unwrap();
    let o = heatflux(&["run", &catalog_path("phi1-m3-linear.json")], out.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.path().join("phi1-m3-linear.csv")).unwrap();
    assert!(csv.starts_with("case_id,check,"), "{csv}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.path().join("phi1-m3-linear.json")).unwrap()).unwrap();
    assert_eq!(json[0]["pass"], true);
}

#[test]
fn zero_flux_runs_only_stationary_checks() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(heatflux(&["run", &catalog_path("stationary-zero-flux.json")], out.path()).status.code(), Some(0));
    let csv = fs::read_to_string(out.path().join("stationary-zero-flux.csv")).unwrap();
    assert!(!csv.contains("volterra") && !csv.contains("green_assembly"), "{csv}");
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("even.json");
    fs::write(
        &path,
        r#"{"id":"even","case":{"phi":{"kind":"linear_x","lambda":1.0},"flux":{"kind":"linear","nu":1.0},
            "h":{"kind":"monomial","eta":1.0,"m":2},"closed_form":true}}"#,
    )
    .unwrap();
    let o = heatflux(&["run", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("odd"));
    fs::write(&path, "{ not json").unwrap();
    assert_eq!(heatflux(&["run", path.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn check_failure_exits_with_one_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.json");
    fs::write(
        &path,
        r#"{"id":"tight","case":{"phi":{"kind":"linear_x","lambda":1.0},"flux":{"kind":"linear","nu":1.0},
            "h":{"kind":"monomial","eta":1.0,"m":1}},"fd":{"nx":16,"nt":16,"tolerance":1e-12}}"#,
    )
    .unwrap();
    let o = heatflux(&["run", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("tight.csv").exists());
}

#[test]
fn sweep_rows_follow_the_grid() {
    let out = tempfile::tempdir().unwrap();
    let o = heatflux(&["sweep", &catalog_path("sweeps/m-by-shape.json")], out.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.path().join("m-by-shape.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12);
    let again = tempfile::tempdir().unwrap();
    heatflux(&["sweep", &catalog_path("sweeps/m-by-shape.json"), "--jobs", "3"], again.path());
    assert_eq!(csv, fs::read_to_string(again.path().join("m-by-shape.csv")).unwrap());
}

#[test]
fn lambda_sweep_hits_the_resonant_branch() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(heatflux(&["sweep", &catalog_path("sweeps/lambda-across-delta.json")], out.path()).status.code(), Some(0));
    let csv = fs::read_to_string(out.path().join("lambda-across-delta.csv")).unwrap();
    let resonant: Vec<&str> = csv.lines().filter(|l| l.contains(",resonant,")).collect();
    assert_eq!(resonant.len(), 1, "{csv}");
    assert!(resonant[0].starts_with("1.0,"), "{}", resonant[0]);
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    fs::write(
        &path,
        r#"{"id":"empty","base":{"phi":{"kind":"linear_x","lambda":1.0},"flux":{"kind":"linear","nu":1.0},
            "h":{"kind":"monomial","eta":1.0,"m":1}},"grid":{}}"#,
    )
    .unwrap();
    assert_eq!(heatflux(&["sweep", path.to_str().unwrap()], dir.path()).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("empty.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn convergence_ladders() {
    let out = tempfile::tempdir().unwrap();
    for name in ["diffusion-septic", "phi2-m1-crank-nicolson"] {
        let o = heatflux(&["convergence", &catalog_path(&format!("convergence/{name}.json"))], out.path());
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stdout));
        let csv = fs::read_to_string(out.path().join(format!("{name}_convergence.csv"))).unwrap();
        assert!(csv.starts_with("level,dx,dt,err_max"));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.json");
    fs::write(
        &path,
        r#"{"id":"short","case":{"phi":{"kind":"linear_x","lambda":1.0},"flux":{"kind":"linear","nu":1.0},
            "h":{"kind":"monomial","eta":1.0,"m":1}},"grid":{"nx":32,"nt":32},"levels":1}"#,
    )
    .unwrap();
    let o = heatflux(&["convergence", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains('3'));
}
