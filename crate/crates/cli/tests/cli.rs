mod common;

use std::fs;

use common::{mrhd, path_str, toy_dir};

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn every_flag_documents_its_default() {
    let cases: [(&str, &[&str]); 6] = [
        (
            "score",
            &[
                "--agg",
                "--rewrites-only",
                "--quant",
                "--threshold-scope",
                "--out",
                "--jobs",
            ],
        ),
        (
            "anchors",
            &[
                "--max-gap",
                "--quant",
                "--threshold-scope",
                "--out",
                "--jobs",
            ],
        ),
        ("predict", &["--top-k", "--confidence", "--out", "--jobs"]),
        ("eval", &["--report", "--max-level", "--very-good-cut"]),
        ("loss-check", &["--trials", "--seed"]),
        (
            "pipeline",
            &[
                "--agg",
                "--max-gap",
                "--top-k",
                "--annotations",
                "--out-dir",
                "--jobs",
            ],
        ),
    ];
    for (cmd, flags) in cases {
        let out = mrhd(&[cmd, "--help"]);
        assert!(out.status.success());
        let help = stdout(&out);
        for flag in flags {
            let pos = help
                .find(&format!("{flag} "))
                .or_else(|| help.find(&format!("{flag}\n")));
            let section = &help[pos.unwrap_or_else(|| panic!("{cmd} help lacks {flag}"))..];
            let entry_end = section[2..]
                .find("\n      --")
                .map_or(section.len(), |i| i + 2);
            assert!(
                section[..entry_end].contains("[default:"),
                "{cmd} {flag} has no default in help"
            );
        }
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mrhd(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        mrhd(&["anchors", "--profiles", "p", "--max-gap", "-3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        mrhd(&[
            "score",
            "--jobs",
            "0",
            "--video-features",
            "v",
            "--query-features",
            "q"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn missing_input_exits_two() {
    let out = mrhd(&[
        "eval",
        "--preds",
        "/no/such/preds.jsonl",
        "--annotations",
        "/no/such/gt.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/no/such/preds.jsonl"));
}

#[test]
fn dimension_mismatch_names_both_dims() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("v.jsonl");
    let query = tmp.path().join("q.jsonl");
    fs::write(
        &video,
        "{\"kind\":\"video\",\"dim\":2}\n{\"index\":0,\"text\":\"a\",\"embedding\":[1.0,0.0]}\n",
    )
    .unwrap();
    fs::write(
        &query,
        "{\"kind\":\"query\",\"dim\":3,\"qid\":1}\n{\"role\":\"original\",\"text\":\"q\",\"embedding\":[1.0,0.0,0.0]}\n",
    )
    .unwrap();
    let out = mrhd(&[
        "score",
        "--video-features",
        path_str(&video),
        "--query-features",
        path_str(&query),
        "--out",
        path_str(&tmp.path().join("p.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains('2') && msg.contains('3'), "{msg}");
    assert!(msg.contains("dimension"), "{msg}");
}

#[test]
fn empty_predictions_score_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let preds = tmp.path().join("preds.jsonl");
    let report = tmp.path().join("metrics.json");
    fs::write(&preds, "").unwrap();
    let ann = toy_dir().join("annotations.jsonl");
    let out = mrhd(&[
        "eval",
        "--preds",
        path_str(&preds),
        "--annotations",
        path_str(&ann),
        "--report",
        path_str(&report),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in [
        "mr_r1_0.5",
        "mr_r1_0.7",
        "mr_map_0.5",
        "mr_map_0.75",
        "mr_map_avg",
        "hd_map",
        "hd_hit1",
    ] {
        assert_eq!(json[key].as_f64(), Some(0.0), "{key}");
    }
    assert!(stdout(&out).contains("mr_map_avg 0"));
}

#[test]
fn loss_check_is_pinned() {
    let out = mrhd(&["loss-check"]);
    assert!(out.status.success());
    assert!(
        stdout(&out).contains("max_rel_err 1.3086789072209971e-8"),
        "{}",
        stdout(&out)
    );
    let other_seed = mrhd(&["loss-check", "--seed", "8", "--trials", "20"]);
    assert!(other_seed.status.success());
    assert!(stdout(&other_seed).contains("trials 20"));
}

#[test]
fn stages_match_pipeline() {
    let toy = toy_dir();
    let tmp = tempfile::tempdir().unwrap();
    let d = |name: &str| tmp.path().join(name);
    let ann = toy.join("annotations.jsonl");
    common::pipeline(
        &toy.join("videos"),
        &toy.join("queries"),
        &ann,
        &d("pipe"),
        1,
    );

    let v: Vec<_> = (1..=3)
        .map(|i| toy.join(format!("videos/toy_v{i}.jsonl")))
        .collect();
    let queries = toy.join("queries");
    let (profiles, anchors, preds, metrics) = (
        d("profiles.jsonl"),
        d("anchors.jsonl"),
        d("predictions.jsonl"),
        d("metrics.json"),
    );
    let steps: [&[&str]; 4] = [
        &[
            "score",
            "--video-features",
            path_str(&v[0]),
            path_str(&v[1]),
            path_str(&v[2]),
            "--query-features",
            path_str(&queries),
            "--out",
            path_str(&profiles),
        ],
        &[
            "anchors",
            "--profiles",
            path_str(&profiles),
            "--out",
            path_str(&anchors),
        ],
        &[
            "predict",
            "--anchors",
            path_str(&anchors),
            "--profiles",
            path_str(&profiles),
            "--out",
            path_str(&preds),
        ],
        &[
            "eval",
            "--preds",
            path_str(&preds),
            "--annotations",
            path_str(&ann),
            "--report",
            path_str(&metrics),
        ],
    ];
    for step in steps {
        let out = mrhd(step);
        assert!(out.status.success(), "{step:?}: {}", stderr(&out));
    }
    for f in [
        "profiles.jsonl",
        "anchors.jsonl",
        "predictions.jsonl",
        "metrics.json",
    ] {
        assert_eq!(
            fs::read(d(f)).unwrap(),
            fs::read(d("pipe").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn pipeline_without_annotations_skips_metrics() {
    let toy = toy_dir();
    let tmp = tempfile::tempdir().unwrap();
    let out = mrhd(&[
        "pipeline",
        "--video-features",
        path_str(&toy.join("videos")),
        "--query-features",
        path_str(&toy.join("queries")),
        "--out-dir",
        path_str(tmp.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp.path().join("predictions.jsonl").exists());
    assert!(!tmp.path().join("metrics.json").exists());
}

#[test]
fn unpinned_query_over_two_videos_cannot_be_predicted() {
    let toy = toy_dir();
    let tmp = tempfile::tempdir().unwrap();
    let query = tmp.path().join("q.jsonl");
    fs::write(
        &query,
        "{\"kind\":\"query\",\"dim\":2,\"qid\":9}\n{\"role\":\"original\",\"text\":\"q\",\"embedding\":[1.0,0.0]}\n",
    )
    .unwrap();
    let out = mrhd(&[
        "pipeline",
        "--video-features",
        path_str(&toy.join("videos/toy_v1.jsonl")),
        path_str(&toy.join("videos/toy_v2.jsonl")),
        "--query-features",
        path_str(&query),
        "--out-dir",
        path_str(&tmp.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("toy_v1") && stderr(&out).contains("toy_v2"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn query_file_passed_as_video_is_rejected() {
    let toy = toy_dir();
    let q = toy.join("queries/q1.jsonl");
    let tmp = tempfile::tempdir().unwrap();
    let out = mrhd(&[
        "score",
        "--video-features",
        path_str(&q),
        "--query-features",
        path_str(&q),
        "--out",
        path_str(&tmp.path().join("p.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("expected a video"));
}

#[test]
fn max_aggregation_and_rewrites_only_run() {
    let toy = toy_dir();
    let tmp = tempfile::tempdir().unwrap();
    let out = mrhd(&[
        "score",
        "--video-features",
        path_str(&toy.join("videos")),
        "--query-features",
        path_str(&toy.join("queries")),
        "--agg",
        "max",
        "--rewrites-only",
        "--out",
        path_str(&tmp.path().join("p.jsonl")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = fs::read_to_string(tmp.path().join("p.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3);
    assert_eq!(
        mrhd(&[
            "score",
            "--agg",
            "median",
            "--video-features",
            "v",
            "--query-features",
            "q"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn video_threshold_scope_runs() {
    let toy = toy_dir();
    let tmp = tempfile::tempdir().unwrap();
    let out = mrhd(&[
        "pipeline",
        "--video-features",
        path_str(&toy.join("videos")),
        "--query-features",
        path_str(&toy.join("queries")),
        "--threshold-scope",
        "video",
        "--out-dir",
        path_str(tmp.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    // one query per video, so pooling changes nothing
    let pinned = fs::read_to_string(tmp.path().join("anchors.jsonl")).unwrap();
    assert!(pinned.contains("[[20.0,44.0,"));
    let bad = mrhd(&["anchors", "--profiles", "p", "--threshold-scope", "global"]);
    assert_eq!(bad.status.code(), Some(1));
}
