use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EXAMPLE_ONE: &str =
    r#"{"p_xy": [[0.693, 0.027, 0.108, 0.072], [0.006, 0.085, 0.004, 0.005]]}"#;
const DETERMINISTIC: &str = r#"{"p_xy": [[0.3, 0.2, 0.0], [0.0, 0.0, 0.5]]}"#;
const SMALL: &str = r#"{"p_xy": [[0.40, 0.06, 0.14], [0.05, 0.25, 0.10]]}"#;

fn write_input(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(input: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privbounds"))
        .arg("--input")
        .arg(input)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn sweep_writes_csv_and_thresholds() {
    let dir = TempDir::new().unwrap();
    let input = write_input(&dir, "ex1.json", EXAMPLE_ONE);
    let csv = dir.path().join("sweep.csv");
    let args = [
        "--command",
        "sweep",
        "--criterion",
        "2",
        "--eps-start",
        "0",
        "--eps-stop",
        "0.03",
        "--eps-count",
        "50",
        "--out",
        csv.to_str().unwrap(),
    ];
    let out = run(&input, &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 51);
    assert!(lines[0].starts_with("eps,L_h1_1,L_h1_2,L_g1,L_g2,U_g1,U_g1_cap,U_h2,U_g2_1,U_g2_2,"));
    let widths: Vec<usize> = lines.iter().map(|l| l.split(',').count()).collect();
    assert!(widths.iter().all(|&w| w == widths[0]));

    let sidecar: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("sweep.csv.thresholds.json")).unwrap(),
    )
    .unwrap();
    assert!((sidecar["half_epsilon2"].as_f64().unwrap() - 0.0171).abs() < 5e-4);
    assert!((sidecar["half_epsilon2_over_sqrt_x"].as_f64().unwrap() - 0.0121).abs() < 5e-4);
    assert!((sidecar["epsilon2"].as_f64().unwrap() - 0.0341).abs() < 5e-4);
    assert!(sidecar["relaxation_limit"].as_f64().unwrap() > 0.0);

    let again = dir.path().join("again.csv");
    let mut args2 = args;
    args2[11] = again.to_str().unwrap();
    assert!(run(&input, &args2).status.success());
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn default_sweep_grid_has_fifty_rows() {
    let dir = TempDir::new().unwrap();
    let input = write_input(&dir, "ex1.json", EXAMPLE_ONE);
    let csv = dir.path().join("d.csv");
    let out = run(
        &input,
        &[
            "--command",
            "sweep",
            "--criterion",
            "1",
            "--out",
            csv.to_str().unwrap(),
        ],
    );
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let last: f64 = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!((last - 0.05).abs() < 1e-12);
}

#[test]
fn validation_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let bad = write_input(&dir, "bad.json", r#"{"p_xy": [[0.5, 0.2], [0.2, 0.2]]}"#);
    let out = run(&bad, &["--command", "validate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NotNormalized"));

    let input = write_input(&dir, "ex1.json", EXAMPLE_ONE);
    let out = run(&input, &["--command", "sweep"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&input, &["--command", "bounds", "--eps", "-0.1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_reports_structure() {
    let dir = TempDir::new().unwrap();
    let input = write_input(&dir, "det.json", DETERMINISTIC);
    let v = json_stdout(&run(&input, &["--command", "validate"]));
    assert_eq!(v["x_size"], 2);
    assert_eq!(v["y_size"], 3);
    assert_eq!(v["x_is_function_of_y"], true);
}

#[test]
fn bounds_at_zero_on_deterministic_input() {
    let dir = TempDir::new().unwrap();
    let input = write_input(&dir, "det.json", DETERMINISTIC);
    let measures = json_stdout(&run(&input, &["--command", "measures"]));
    let h_y_x = measures["h_y_given_x"].as_f64().unwrap();
    let reports = json_stdout(&run(&input, &["--command", "bounds", "--eps", "0"]));
    let report = &reports[0];
    assert_eq!(report["special_case_deterministic_x"], true);
    for entry in report["bounds"].as_array().unwrap() {
        let name = entry[0].as_str().unwrap();
        if ["LH1One", "UG1", "UH2"].contains(&name) {
            let v = entry[1]["value"].as_f64().unwrap();
            assert!((v - h_y_x).abs() < 1e-9, "{name}: {v} vs {h_y_x}");
        }
    }
}

#[test]
fn measures_respect_the_base() {
    let dir = TempDir::new().unwrap();
    let input = write_input(&dir, "ex1.json", EXAMPLE_ONE);
    let bits = json_stdout(&run(&input, &["--command", "measures"]));
    let nats = json_stdout(&run(&input, &["--command", "measures", "--base", "nats"]));
    let ratio = nats["h_y"].as_f64().unwrap() / bits["h_y"].as_f64().unwrap();
    assert!((ratio - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn mechanism_constructions() {
    let dir = TempDir::new().unwrap();
    let input = write_input(&dir, "ex1.json", EXAMPLE_ONE);
    let lp_path = dir.path().join("m.lp");
    let omega_path = dir.path().join("omega.json");
    let v = json_stdout(&run(
        &input,
        &[
            "--command",
            "mechanism",
            "--construct",
            "lp",
            "--criterion",
            "2",
            "--eps",
            "0.01",
            "--dump-lp",
            lp_path.to_str().unwrap(),
            "--dump-omega",
            omega_path.to_str().unwrap(),
        ],
    ));
    assert_eq!(v["verification"]["pass"], true);
    assert!(v["letters"].as_array().unwrap().len() <= 4);
    let lp = fs::read_to_string(&lp_path).unwrap();
    assert!(lp.contains("Minimize") && lp.contains("Subject To"));
    let omega: Value = serde_json::from_str(&fs::read_to_string(&omega_path).unwrap()).unwrap();
    assert_eq!(omega.as_array().unwrap().len(), 6);

    let v = json_stdout(&run(
        &input,
        &[
            "--command",
            "mechanism",
            "--construct",
            "efrl",
            "--eps",
            "0.05",
        ],
    ));
    assert_eq!(v["verification"]["pass"], true);
    let target = 0.05 * 0.05 / 2.0;
    assert!((v["diagnostics"]["achieved_leakage_nats"].as_f64().unwrap() - target).abs() < 1e-9);

    let v = json_stdout(&run(
        &input,
        &["--command", "mechanism", "--construct", "frl", "--eps", "0"],
    ));
    assert_eq!(v["verification"]["pass"], true);

    let out = run(
        &input,
        &[
            "--command",
            "mechanism",
            "--construct",
            "lp",
            "--eps",
            "0.01",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn infeasible_regime_exits_two() {
    let dir = TempDir::new().unwrap();
    let input = write_input(&dir, "ex1.json", EXAMPLE_ONE);
    let out = run(
        &input,
        &[
            "--command",
            "mechanism",
            "--construct",
            "efrl",
            "--eps",
            "5",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RegimeViolation"));
}

#[test]
fn oracle_verify_passes_on_small_instance() {
    let dir = TempDir::new().unwrap();
    let input = write_input(&dir, "small.json", SMALL);
    let out_path = dir.path().join("sandwich.json");
    let out = run(
        &input,
        &[
            "--command",
            "oracle-verify",
            "--eps-start",
            "0",
            "--eps-stop",
            "0.02",
            "--eps-count",
            "3",
            "--out",
            out_path.to_str().unwrap(),
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r["pass"] == true));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
}
