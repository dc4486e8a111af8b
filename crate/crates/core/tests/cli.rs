mod common;

use common::{data_path, golden_path, rel_err, residual_scatter_oracle};
use pose_scatter::pose_io::{parse_pose_sequence, PoseFormat};
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pose-scatter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    data_path(name).to_string_lossy().into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn validate_reports_ok() {
    let out = run(&[
        "validate",
        &data("sample_jump.json"),
        &data("table_clip.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).trim_end().ends_with("OK"));
}

#[test]
fn validate_reports_violation() {
    let out = run(&["validate", &data("bad_17_keypoints.json")]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out) + &String::from_utf8_lossy(&out.stderr);
    assert!(
        text.contains("frame 3: expected 18 keypoints, got 17"),
        "{text}"
    );
}

#[test]
fn validate_missing_file_is_io_error() {
    let out = run(&["validate", "/nonexistent/clip.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hps_constant_cross() {
    let out = run(&["hps", &data("constant_cross.json")]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frame_index,zeta,status"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0], i.to_string());
        assert!((cols[1].parse::<f64>().unwrap() - 2.0).abs() <= 1e-12);
        assert_eq!(cols[2], "computed");
    }
}

#[test]
fn hps_golden_matches_projection_oracle() {
    let seq = parse_pose_sequence(
        &std::fs::read(data_path("sample_jump.json")).unwrap(),
        PoseFormat::Json,
    )
    .unwrap();
    let golden = std::fs::read_to_string(golden_path("sample_jump_hps.csv")).unwrap();
    let out = run(&["hps", &data("sample_jump.json")]);
    assert_eq!(stdout(&out), golden);
    for row in golden.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        let t: usize = cols[0].parse().unwrap();
        let zeta: f64 = cols[1].parse().unwrap();
        match cols[2] {
            "computed" => {
                let pts = seq.frames[t].valid_points(0.05);
                assert!(
                    rel_err(zeta, residual_scatter_oracle(&pts)) <= 1e-9,
                    "frame {t}"
                );
            }
            "interpolated" => assert_eq!(t, 33),
            other => panic!("unexpected status {other}"),
        }
    }
}

#[test]
fn sample_is_deterministic() {
    let args = [
        "sample",
        &data("sample_jump.json"),
        "--k",
        "5",
        "--L",
        "2",
        "--seed",
        "42",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let plan = json(&a);
    assert_eq!(plan["segment_picks"].as_array().unwrap().len(), 5);
}

#[test]
fn sample_too_many_segments_fails() {
    let out = run(&["sample", &data("constant_cross.json"), "--k", "6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn sample_without_keyframe_sets() {
    let plan = json(&run(&["sample", &data("sample_jump.json"), "--L", "0"]));
    assert_eq!(plan["keyframe_picks"], Value::Array(vec![]));
    assert_eq!(plan["L"], 0);
}

#[test]
fn sample_matches_golden_plans() {
    let cases: [(&str, &str, &[&str]); 3] = [
        ("sample_jump.json", "sample_jump_plan_default.json", &[]),
        (
            "sample_jump.json",
            "sample_jump_plan_k11_l2.json",
            &["--k", "11", "--L", "2", "--delta", "3", "--seed", "20191"],
        ),
        (
            "constant_cross.json",
            "constant_cross_plan.json",
            &["--k", "1", "--L", "1", "--delta", "0"],
        ),
    ];
    for (input, golden, extra) in cases {
        let input = data(input);
        let mut args = vec!["sample", input.as_str()];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert_eq!(
            stdout(&out),
            std::fs::read_to_string(golden_path(golden)).unwrap()
        );
    }
}

#[test]
fn classify_with_toy_scorer() {
    let scorer = format!("toy:{}", data("prototypes.json"));
    let v = json(&run(&[
        "classify",
        &data("constant_cross.json"),
        "--scorer",
        &scorer,
        "--k",
        "1",
        "--delta",
        "0",
    ]));
    assert_eq!(v["predicted"], "cross");
    let sum: f64 = v["probs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_f64().unwrap())
        .sum();
    assert!((sum - 1.0).abs() <= 1e-12);
}

#[test]
fn classify_with_score_file() {
    let scorer = format!("file:{}", data("sample_scores.json"));
    let v = json(&run(&[
        "classify",
        &data("sample_jump.json"),
        "--scorer",
        &scorer,
    ]));
    let labels: Vec<&str> = v["class_labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l.as_str().unwrap())
        .collect();
    assert_eq!(labels, ["2Axel", "3Loop", "StepSequence3"]);
    assert!(labels.contains(&v["predicted"].as_str().unwrap()));
}

#[test]
fn classify_with_saved_plan() {
    let scorer = format!("file:{}", data("sample_scores.json"));
    let plan = golden_path("sample_jump_plan_k11_l2.json");
    let with_plan = run(&[
        "classify",
        &data("sample_jump.json"),
        "--scorer",
        &scorer,
        "--plan",
        plan.to_str().unwrap(),
    ]);
    let sampled = run(&[
        "classify",
        &data("sample_jump.json"),
        "--scorer",
        &scorer,
        "--k",
        "11",
        "--L",
        "2",
        "--delta",
        "3",
        "--seed",
        "20191",
    ]);
    assert!(with_plan.status.success());
    assert_eq!(with_plan.stdout, sampled.stdout);
}

#[test]
fn classify_missing_frame_score() {
    let scorer = format!("file:{}", data("partial_scores.json"));
    let out = run(&[
        "classify",
        &data("sample_jump.json"),
        "--scorer",
        &scorer,
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no score for frame 21"), "{err}");
}

#[test]
fn score_program_single_clip() {
    let v = json(&run(&["score-program", &data("table_clip.csv")]));
    let row = &v["actions"][0];
    assert_eq!(row["type"], "2Axel");
    assert!((row["bv_effective"].as_f64().unwrap() - 3.63).abs() <= 1e-9);
    assert!((row["total"].as_f64().unwrap() - 4.21).abs() <= 1e-9);
    assert!((v["total"].as_f64().unwrap() - 4.21).abs() <= 1e-9);
}

#[test]
fn score_program_zeroes_repeat() {
    let v = json(&run(&["score-program", &data("program_repeat.csv")]));
    let zeroed: Vec<bool> = v["actions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["zeroed"].as_bool().unwrap())
        .collect();
    assert_eq!(zeroed, [false, false, true]);
    assert!((v["total"].as_f64().unwrap() - 8.2).abs() <= 1e-9);
}

#[test]
fn score_program_empty_manifest() {
    let v = json(&run(&["score-program", &data("empty_manifest.csv")]));
    assert_eq!(v["actions"], Value::Array(vec![]));
    assert_eq!(v["total"].as_f64(), Some(0.0));
}

#[test]
fn segment_planted_clip() {
    let v = json(&run(&[
        "segment",
        &data("planted_phases.json"),
        "--delta",
        "1",
    ]));
    assert_eq!(v["keyframe"], 11);
    let span = |k: &str| {
        (
            v[k]["start"].as_u64().unwrap(),
            v[k]["end"].as_u64().unwrap(),
        )
    };
    assert_eq!(span("preparation"), (0, 10));
    assert_eq!(span("take_off"), (10, 13));
    assert_eq!(span("air"), (13, 21));
    assert_eq!(span("landing"), (21, 27));
}

#[test]
fn segment_short_clip_fails() {
    let out = run(&["segment", &data("constant_cross.json"), "--delta", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_config_is_domain_error() {
    let out = run(&["hps", &data("constant_cross.json"), "--smooth", "4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("curve.csv");
    let out = run(&[
        "hps",
        &data("constant_cross.json"),
        "--out",
        target.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&target).unwrap();
    assert_eq!(
        written,
        stdout(&run(&["hps", &data("constant_cross.json")]))
    );
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 1);
}

#[test]
fn out_flag_to_missing_directory_is_io_error() {
    let out = run(&[
        "score-program",
        &data("table_clip.csv"),
        "--out",
        Path::new("/nonexistent/dir/out.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
