//! End-to-end checks of the `platefuse` binary: subcommand wiring, stream
//! round trips, exit codes, and worker-count determinism at the process
//! boundary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn platefuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platefuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_lines(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn simulate_then_run_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("stream.jsonl");
    let truth = dir.path().join("truth.jsonl");
    let readouts = dir.path().join("readouts.jsonl");

    let out = platefuse(&[
        "simulate",
        "--plates",
        "5",
        "--frames",
        "12",
        "--miss-prob",
        "0.05",
        "--confusion-prob",
        "0.05",
        "--seed",
        "9",
        "--output",
        stream.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = platefuse(&[
        "run",
        "--input",
        stream.to_str().unwrap(),
        "--output",
        readouts.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let truths = read_lines(&truth);
    let results = read_lines(&readouts);
    assert_eq!(truths.len(), 5);
    assert_eq!(results.len(), 5);
    for (t, r) in truths.iter().zip(&results) {
        assert_eq!(t["plate_id"], r["plate_id"]);
        assert_eq!(t["text"], r["text"], "plate {}", t["plate_id"]);
        let vehicle = r["vehicle_id"].as_str().unwrap();
        assert_eq!(vehicle, format!("veh-{}", t["plate_id"].as_str().unwrap()));
        assert!(r["alpha_final_deg"].is_number());
        assert_eq!(r["chars"].as_array().unwrap().len(), 7);
    }
}

#[test]
fn run_output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("stream.jsonl");
    let out = platefuse(&[
        "simulate",
        "--plates",
        "10",
        "--frames",
        "10",
        "--tilt-deg",
        "14",
        "--seed",
        "5",
        "--output",
        stream.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let one = dir.path().join("one.jsonl");
    let four = dir.path().join("four.jsonl");
    for (workers, path) in [("1", &one), ("4", &four)] {
        let out = platefuse(&[
            "run",
            "--input",
            stream.to_str().unwrap(),
            "--output",
            path.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&one).unwrap(), fs::read(&four).unwrap());
}

#[test]
fn strict_ingestion_fails_with_data_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("bad.jsonl");
    fs::write(
        &stream,
        r#"{"plate_id": "p", "frame": 0, "plate_box": [0,0,100,40], "vehicles": [], "chars": [{"cx": 5, "cy": 20, "w": 10, "h": 20, "class": "A", "conf": 1.7}]}"#,
    )
    .unwrap();
    let out = platefuse(&["run", "--input", stream.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 1"), "{stderr}");

    // Lenient mode downgrades the line to a warning and produces no plate.
    let out = platefuse(&[
        "run",
        "--input",
        stream.to_str().unwrap(),
        "--strict",
        "false",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped line 1"));
}

#[test]
fn usage_errors_exit_one() {
    let out = platefuse(&["run", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = platefuse(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let out = platefuse(&["run", "--input", "/nonexistent/stream.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_emits_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = platefuse(&[
        "bench",
        "--plates",
        "20",
        "--frames",
        "8",
        "--seed",
        "3",
        "--methods",
        "single_frame,ctm",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["plates"], 20);
    for method in ["single_frame_best", "single_frame_majority", "ctm"] {
        let acc = parsed[method]["plate_accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc), "{method} accuracy {acc}");
    }
    assert!(parsed.get("ar_ctm").is_none());
}

#[test]
fn oracle_subcommand_passes() {
    let out = platefuse(&["oracle", "--cases", "100", "--seed", "1"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 mismatches"));
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("platefuse.conf");
    fs::write(&config, "strict = false\nmin_hits = 1\n").unwrap();
    let stream = dir.path().join("bad.jsonl");
    fs::write(&stream, "not json\n").unwrap();

    // Config's strict=false lets the bad line pass as a warning.
    let out = platefuse(&[
        "run",
        "--input",
        stream.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    // Flag overrides config back to strict.
    let out = platefuse(&[
        "run",
        "--input",
        stream.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--strict",
        "true",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rotated_view_stream_differs_only_in_noise() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.jsonl");
    let rotated = dir.path().join("rotated.jsonl");
    for (view, path) in [("raw", &raw), ("rotated", &rotated)] {
        let out = platefuse(&[
            "simulate",
            "--plates",
            "2",
            "--frames",
            "6",
            "--tilt-deg",
            "20",
            "--seed",
            "11",
            "--view",
            view,
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let raw_lines = read_lines(&raw);
    let rotated_lines = read_lines(&rotated);
    assert_eq!(raw_lines.len(), rotated_lines.len());
    for (a, b) in raw_lines.iter().zip(&rotated_lines) {
        assert_eq!(a["plate_id"], b["plate_id"]);
        assert_eq!(a["frame"], b["frame"]);
        let ca = a["chars"].as_array().unwrap();
        let cb = b["chars"].as_array().unwrap();
        assert_eq!(ca.len(), cb.len());
        for (x, y) in ca.iter().zip(cb) {
            assert_eq!(x["cx"], y["cx"]);
            assert_eq!(x["cy"], y["cy"]);
        }
    }
}
