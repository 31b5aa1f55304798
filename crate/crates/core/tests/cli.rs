use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dgsem_ale::harness::{Experiment, RunConfig};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgsem-ale"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn shipped_configs_match_presets() {
    for e in Experiment::ALL {
        let path = configs_dir().join(format!("{}.json", e.as_str()));
        let loaded = RunConfig::load(&path, None).unwrap();
        let mut preset = RunConfig::preset(e);
        preset.output.dir = format!("results/{}", e.as_str()).into();
        assert_eq!(loaded, preset, "{}", path.display());
    }
}

#[test]
fn freestream_smoke_run_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"mesh": {"elements": [2, 2, 2]}, "run": {"dt": [0.01], "t_final": 0.1}}"#,
    );
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let o = run_cli(&["freestream", "--config", &config, "--out", out_s, "--n-poly", "3"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}\n{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.lines().last().unwrap().ends_with("freestream PASS"), "{stdout}");

    let table = fs::read_to_string(out.join("freestream.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("N,flux,linf_error"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0], "3");
        let err: f64 = cells[2].parse().unwrap();
        assert!(cells[2].contains('e') && err <= 1e-11, "{row}");
    }
    let summary = fs::read_to_string(out.join("freestream_summary.csv")).unwrap();
    assert!(summary.starts_with("experiment,check,result,measured,threshold\n"));
}

#[test]
fn failing_threshold_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "mesh": {"elements": [2, 2, 2], "periodic": [false, false, false]},
            "run": {"degrees": [2], "dt": [0.01], "t_final": 0.05, "tolerance": 1e-12},
            "physics": {"initial_condition": "plane_wave"}
        }"#,
    );
    let out = dir.path().join("out");
    let o = run_cli(&["custom", "--config", &config, "--out", out.to_str().unwrap(), "--flux", "upwind"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("custom FAIL"), "{stdout}");
    let table = fs::read_to_string(out.join("custom.csv")).unwrap();
    assert!(table.starts_with("N,dt,flux,formulation,step,time,energy,"));
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"run": {"no_such_key": 1}}"#);
    let o = run_cli(&["conservation", "--config", &config]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}
