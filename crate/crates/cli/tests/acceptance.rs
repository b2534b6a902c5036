//! CLI acceptance: deterministic reruns are byte-identical, and the
//! emitted tables carry the documented columns, values, and exit codes.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

/// Parses CSV text into (header, numeric rows), skipping '#' metadata.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .expect("header line")
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|line| {
            line.split(',')
                .map(|cell| cell.parse::<f64>().expect("numeric cell"))
                .collect()
        })
        .collect();
    (header, rows)
}

const PI_TEXT: &str = "3.141592653589793";

#[test]
fn criterion_12_deterministic_runs_are_byte_identical() {
    let phi3 = format!("phi3=0:{PI_TEXT}:41");
    let theta = format!("theta=0:{PI_TEXT}:21");
    let phi = format!("phi=0:{PI_TEXT}:21");
    let invocations: Vec<Vec<&str>> = vec![
        vec!["sweep-k4", "--deterministic", "--seed", "5", "--grid", &phi3],
        vec![
            "sweep-k3",
            "--deterministic",
            "--seed",
            "2",
            "--format",
            "json",
            "--grid",
            &theta,
            "--grid",
            &phi,
        ],
        vec![
            "sweep-witness",
            "--deterministic",
            "--seed",
            "8",
            "--grid",
            &theta,
            "--grid",
            &phi,
        ],
        vec![
            "optimize",
            "--deterministic",
            "--seed",
            "3",
            "--levels",
            "2",
            "--times",
            "3",
            "--budget",
            "8:400",
        ],
        vec![
            "noise",
            "--deterministic",
            "--seed",
            "9",
            "--counts",
            "2000",
            "--repeats",
            "50",
        ],
    ];
    for args in &invocations {
        let first = run(args);
        let second = run(args);
        assert!(first.status.success(), "{args:?} failed");
        assert!(!first.stdout.is_empty(), "{args:?} produced no output");
        assert_eq!(
            first.stdout, second.stdout,
            "{args:?} output differs between reruns"
        );
    }

    // Reruns through --out must also be byte-identical on disk.
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("out.csv");
    let path_text = path.to_str().expect("utf-8 path");
    let args = [
        "sweep-k4",
        "--deterministic",
        "--seed",
        "5",
        "--grid",
        &phi3,
        "--out",
        path_text,
    ];
    assert!(run(&args).status.success());
    let first = std::fs::read(&path).expect("output file");
    assert!(run(&args).status.success());
    let second = std::fs::read(&path).expect("output file");
    assert_eq!(first, second, "--out bytes differ between reruns");
    println!("criterion 12 PASS: byte-identical reruns for all five subcommands");
}

#[test]
fn sweep_k4_reports_the_known_maxima() {
    let grid = format!("phi3=0:{PI_TEXT}:41");
    let text = run_ok(&["sweep-k4", "--deterministic", "--grid", &grid]);
    let (header, rows) = parse_csv(&text);
    assert_eq!(
        header,
        ["phi3", "theta3", "c21", "c32", "c34", "c41", "k4", "k4_closed_form"]
    );
    // The 41-point grid on [0, pi] lands on pi/4 and 3pi/4; printed
    // values carry 12 significant digits, hence the 5e-12 match window.
    let k4_at = |phi3: f64| -> f64 {
        rows.iter()
            .find(|r| (r[0] - phi3).abs() <= 5e-12 && (r[1] - FRAC_PI_2).abs() <= 5e-12)
            .expect("grid point present")[6]
    };
    assert!((k4_at(FRAC_PI_4) - 3.0).abs() <= 1e-9);
    assert!((k4_at(3.0 * FRAC_PI_4) - 3.0).abs() <= 1e-9);
    let closed_at_max = rows
        .iter()
        .find(|r| (r[0] - FRAC_PI_4).abs() <= 5e-12 && (r[1] - FRAC_PI_2).abs() <= 5e-12)
        .expect("grid point present")[7];
    assert!((closed_at_max - 3.75).abs() <= 1e-12, "printed form = 15/4");
}

#[test]
fn sweep_k3_reports_the_known_maximum() {
    let theta = format!("theta=0:{PI_TEXT}:41");
    let phi = format!("phi=0:{PI_TEXT}:41");
    let text = run_ok(&["sweep-k3", "--deterministic", "--grid", &theta, "--grid", &phi]);
    let (header, rows) = parse_csv(&text);
    assert_eq!(header, ["theta", "phi", "c21", "c32", "c31", "k3"]);
    assert_eq!(rows.len(), 41 * 41);
    for row in &rows {
        assert!((row[4] + 1.0).abs() <= 1e-12, "c31 must stay -1");
    }
    let max_row = rows
        .iter()
        .find(|r| (r[0] - FRAC_PI_4).abs() <= 5e-12 && (r[1] - FRAC_PI_2).abs() <= 5e-12)
        .expect("grid point present");
    assert!((max_row[5] - 2.0).abs() <= 1e-9);
}

#[test]
fn sweep_witness_rows_satisfy_the_magnitude_relation() {
    let theta = format!("theta=0:{PI_TEXT}:21");
    let phi = format!("phi=0:{PI_TEXT}:21");
    let text = run_ok(&[
        "sweep-witness",
        "--deterministic",
        "--grid",
        &theta,
        "--grid",
        &phi,
    ]);
    let (header, rows) = parse_csv(&text);
    assert_eq!(
        header,
        ["theta", "phi", "p3_no_meas", "p3_with_meas", "w", "k3w"]
    );
    // 12-digit rounding of each printed column allows ~5e-12 slack in
    // identities combining several columns.
    for row in &rows {
        let w = row[4];
        let k3w = row[5];
        assert!(((k3w - 1.0).abs() - w.abs()).abs() <= 1e-11);
        assert!((row[2] - row[3] - w).abs() <= 1e-11, "w = p_no - p_with");
    }
}

#[test]
fn optimize_emits_a_verified_row() {
    let text = run_ok(&[
        "optimize",
        "--deterministic",
        "--levels",
        "2",
        "--times",
        "3",
        "--budget",
        "8:400",
    ]);
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    assert_eq!(
        header,
        [
            "levels",
            "times",
            "constrained",
            "best_k",
            "verified",
            "slot1_labeling",
            "shared_labeling"
        ]
    );
    let row: Vec<&str> = lines.next().expect("row").split(',').collect();
    assert_eq!(row[0], "2");
    assert_eq!(row[1], "3");
    assert_eq!(row[2], "false");
    let best: f64 = row[3].parse().expect("numeric best_k");
    assert!((best - 1.5).abs() <= 1e-3, "N=2 K3 best = {best}");
    assert_eq!(row[4], "true");
}

#[test]
fn degrees_flag_converts_grid_bounds() {
    let text = run_ok(&[
        "sweep-k3",
        "--deterministic",
        "--degrees",
        "--grid",
        "theta=45:45:1",
        "--grid",
        "phi=90:90:1",
    ]);
    let (_, rows) = parse_csv(&text);
    assert_eq!(rows.len(), 1);
    assert!((rows[0][0] - FRAC_PI_4).abs() <= 5e-12);
    assert!((rows[0][1] - FRAC_PI_2).abs() <= 5e-12);
    assert!((rows[0][5] - 2.0).abs() <= 1e-9);
}

#[test]
fn config_errors_exit_with_code_2() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["sweep-k3", "--grid", "bogus=0:1:5"],
        vec!["sweep-k3", "--grid", "theta=1:0:5"],
        vec!["optimize", "--times", "5"],
        vec!["optimize", "--budget", "nope"],
        vec!["noise", "--repeats", "1"],
    ];
    for args in &cases {
        let out = run(args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?} exit code, stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty(), "{args:?} must explain the error");
    }
}

#[test]
fn io_errors_exit_with_code_3() {
    let out = run(&[
        "sweep-k3",
        "--deterministic",
        "--grid",
        "theta=0:1:2",
        "--grid",
        "phi=0:1:2",
        "--out",
        "/nonexistent-dir-for-lgsim-test/out.csv",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn json_output_carries_metadata_and_typed_rows() {
    let theta = format!("theta=0:{PI_TEXT}:5");
    let phi = format!("phi=0:{PI_TEXT}:5");
    let text = run_ok(&[
        "sweep-k3",
        "--deterministic",
        "--seed",
        "4",
        "--format",
        "json",
        "--grid",
        &theta,
        "--grid",
        &phi,
    ]);
    let value: serde_json::Value = serde_json::from_str(&text).expect("valid json");
    let metadata = value["metadata"].as_object().expect("metadata object");
    assert!(metadata.contains_key("tool"));
    assert!(metadata.contains_key("command"));
    assert_eq!(metadata["seed"], "4");
    assert!(
        !metadata.contains_key("timestamp_unix_s"),
        "--deterministic must drop the timestamp"
    );
    let rows = value["rows"].as_array().expect("rows array");
    assert_eq!(rows.len(), 25);
    for key in ["theta", "phi", "c21", "c32", "c31", "k3"] {
        assert!(rows[0][key].is_f64(), "row field {key} must be numeric");
    }

    // Without --deterministic the timestamp is present.
    let stamped = run_ok(&[
        "sweep-k3",
        "--format",
        "json",
        "--grid",
        &theta,
        "--grid",
        &phi,
    ]);
    let stamped: serde_json::Value = serde_json::from_str(&stamped).expect("valid json");
    assert!(stamped["metadata"]
        .as_object()
        .expect("metadata object")
        .contains_key("timestamp_unix_s"));
}
