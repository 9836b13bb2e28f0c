mod common;

use std::fs;

use abkit::RunManifest;
use abkit_core::hit::{CandidatePool, Hit, ImageRef};
use abkit_core::qc::HitVerdict;
use abkit_core::rng::stream_rng;
use abkit_core::synth::{annotate_browsing_hit, browsing_qc_case, click_corpus};
use abkit_core::truth::BrowsingTruth;
use common::{abkit, path_arg, run_twice, write_records, write_rows};
use tempfile::tempdir;

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(abkit(&["qc", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(abkit(&["frobnicate"]).status.code(), Some(2));
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(abkit(&["analyze", "--stat", "clicks", "--out", path_arg(&out)]).status.code(), Some(2));
    assert_eq!(abkit(&["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_with_one() {
    let dir = tempdir().unwrap();
    let records = dir.path().join("r.jsonl");
    fs::write(&records, "{\"image_id\": 1}\n").unwrap();
    let gt = dir.path().join("gt.jsonl");
    fs::write(&gt, "").unwrap();
    let report = dir.path().join("report");
    let o = abkit(&[
        "qc",
        "--records",
        path_arg(&records),
        "--gt",
        path_arg(&gt),
        "--interface",
        "imagenet",
        "--report",
        path_arg(&report),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn qc_writes_verdicts_for_a_boundary_fixture() {
    let dir = tempdir().unwrap();
    let (mut records, t1) = browsing_qc_case("ok", 150, 50, 100, 0, 10);
    let (r2, t2) = browsing_qc_case("low", 150, 45, 100, 0, 10);
    records.extend(r2);
    let rec = dir.path().join("records.jsonl");
    let gt = dir.path().join("gt.jsonl");
    write_records(&rec, &records);
    write_rows(&gt, &[t1, t2]);
    let report = dir.path().join("report");
    let o = abkit(&[
        "qc",
        "--records",
        path_arg(&rec),
        "--gt",
        path_arg(&gt),
        "--interface",
        "imagenet",
        "--report",
        path_arg(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let verdicts: Vec<HitVerdict> = fs::read_to_string(report.join("verdicts.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(verdicts.len(), 2);
    assert!(!verdicts[0].is_rejected());
    assert!(verdicts[1].is_rejected());
    let summary = fs::read_to_string(report.join("summary.csv")).unwrap();
    assert!(summary.contains("reason:LowRecall,1"), "{summary}");
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(report.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.command, "qc");
    assert_eq!(m.inputs.len(), 2);
}

#[test]
fn hits_flow_through_annotation_and_qc() {
    let dir = tempdir().unwrap();
    let pools = dir.path().join("pools.jsonl");
    let pool = CandidatePool {
        class_id: "n01530575".into(),
        seed_images: (0..130).map(|i| ImageRef::new(format!("s{i}"))).collect(),
        distractor_images: (0..400).map(|i| ImageRef::new(format!("d{i}"))).collect(),
    };
    write_rows(&pools, &[pool]);
    let hits_dir = dir.path().join("hits");
    let o = abkit(&[
        "make-hits",
        "--interface",
        "browsing",
        "--pools",
        path_arg(&pools),
        "--per-class",
        "3",
        "--seed",
        "4",
        "--out",
        path_arg(&hits_dir),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hits: Vec<Hit> = fs::read_to_string(hits_dir.join("hits.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(hits.len(), 3);

    // Two diligent annotators and one careless one.
    let mut rng = stream_rng(8, 0);
    let mut records = Vec::new();
    for (i, h) in hits.iter().enumerate() {
        let Hit::Browsing(b) = h else { panic!("browsing HIT expected") };
        let rate = if i == 1 { 0.1 } else { 0.9 };
        records.extend(annotate_browsing_hit(b, rate, 0.02, &mut rng));
    }
    let rec = dir.path().join("records.jsonl");
    write_records(&rec, &records);
    let report = dir.path().join("qc");
    let o = abkit(&[
        "qc",
        "--records",
        path_arg(&rec),
        "--gt",
        path_arg(&hits_dir.join("truth.jsonl")),
        "--interface",
        "imagenet",
        "--hits",
        path_arg(&hits_dir.join("hits.jsonl")),
        "--report",
        path_arg(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reposts: Vec<Hit> = fs::read_to_string(report.join("reposts.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(reposts.len(), 1);
    assert_eq!(reposts[0].assignment_id(), format!("{}-r1", hits[1].assignment_id()));
    let truth: Vec<BrowsingTruth> = fs::read_to_string(hits_dir.join("truth.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(truth[0].seed_count(), 120);
}

#[test]
fn tagging_hits_need_whole_pages() {
    let dir = tempdir().unwrap();
    let images = dir.path().join("images.json");
    fs::write(&images, serde_json::to_string(&(1..=40).collect::<Vec<u64>>()).unwrap()).unwrap();
    let out = dir.path().join("t");
    let o = abkit(&["make-hits", "--interface", "tagging", "--images", path_arg(&images), "--out", path_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("hits.jsonl")).unwrap().lines().count(), 2);
    fs::write(&images, "[1, 2, 3]").unwrap();
    let o = abkit(&["make-hits", "--interface", "tagging", "--images", path_arg(&images), "--out", path_arg(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

fn click_fixture(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let (records, boxes) = click_corpus(2, 200, 0.8);
    let rec = dir.join("records.jsonl");
    let gt = dir.join("boxes.jsonl");
    write_records(&rec, &records);
    write_rows(&gt, &boxes);
    (rec, gt)
}

#[test]
fn analyze_reruns_are_bitwise_identical() {
    let dir = tempdir().unwrap();
    let (rec, gt) = click_fixture(dir.path());
    for stat in ["clicks", "sweep", "quantiles", "bias"] {
        let out = dir.path().join(stat);
        let args = [
            "analyze",
            "--stat",
            stat,
            "--records",
            path_arg(&rec),
            "--gt",
            path_arg(&gt),
            "--samples",
            "200",
            "--out",
            path_arg(&out),
        ];
        let (a, b) = run_twice(&args, &out);
        assert!(a.keys().any(|k| k.extension().is_some_and(|e| e == "csv")), "{stat}");
        assert_eq!(a, b, "{stat}");
    }
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let dir = tempdir().unwrap();
    let (_, gt) = click_fixture(dir.path());
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["analyze", "--stat", "sweep", "--gt", path_arg(&gt), "--out", path_arg(&out)];
        args.extend_from_slice(extra);
        assert!(abkit(&args).status.success());
        fs::read(out.join("sweep.csv")).unwrap()
    };
    assert_eq!(run("par", &[]), run("seq", &["--sequential"]));
}

#[test]
fn train_reruns_are_bitwise_identical_and_eval_reproduces_them() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("train");
    let args = [
        "train",
        "--mode",
        "luab",
        "--seeds",
        "3,4",
        "--train-size",
        "200",
        "--val-size",
        "50",
        "--test-size",
        "100",
        "--epochs",
        "1",
        "--out",
        path_arg(&out),
    ];
    let (a, b) = run_twice(&args, &out);
    assert_eq!(a, b);
    for f in ["report.csv", "report.json", "curves_seed3.csv", "model_seed4.json", "manifest.json"] {
        assert!(a.keys().any(|k| k.to_str() == Some(f)), "missing {f}");
    }
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.seeds, vec![3, 4]);

    let o = abkit(&["eval", "--model", path_arg(&out.join("model_seed3.json")), "--suite", "bggap"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let eval: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(eval["metrics"]["bg_gap"], report[0]["report"]["bg_gap"]);
    let o = abkit(&["eval", "--model", path_arg(&out.join("model_seed3.json")), "--suite", "vmetrics"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("abkit.toml");
    let out = dir.path().join("o");
    fs::write(
        &cfg,
        format!(
            "[train]\nmode = \"rand\"\nepochs = 3\ntrain_size = 120\nval_size = 20\ntest_size = 40\nout = {:?}\n",
            path_arg(&out)
        ),
    )
    .unwrap();
    let o = abkit(&["--config", path_arg(&cfg), "train", "--epochs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.config["mode"], "rand");
    assert_eq!(m.config["experiment"]["train"]["epochs"], 1);
    assert_eq!(m.config["experiment"]["train_size"], 120);
    assert_eq!(fs::read_to_string(out.join("curves_seed0.csv")).unwrap().lines().count(), 2);

    fs::write(&cfg, "[train]\nepoch = 3\n").unwrap();
    assert_eq!(abkit(&["--config", path_arg(&cfg), "train"]).status.code(), Some(2));
    fs::write(&cfg, "[trian]\nepochs = 3\n").unwrap();
    assert_eq!(abkit(&["--config", path_arg(&cfg), "train"]).status.code(), Some(2));
}

#[test]
fn report_renders_csv_tables() {
    let dir = tempdir().unwrap();
    let (rec, gt) = click_fixture(dir.path());
    let a = dir.path().join("a");
    assert!(abkit(&[
        "analyze",
        "--stat",
        "quantiles",
        "--records",
        path_arg(&rec),
        "--gt",
        path_arg(&gt),
        "--bins",
        "60",
        "--out",
        path_arg(&a)
    ])
    .status
    .success());
    let out = dir.path().join("report");
    let o = abkit(&["report", "--inputs", path_arg(&a), "--max-rows", "50", "--out", path_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("### quantiles.csv"));
    assert!(md.contains("| bin | accuracy | count |"));
    assert!(md.contains("Command `analyze`"));
    assert!(md.contains("10 more rows not shown."));
}
