mod common;

use std::path::Path;

use common::{json, ok, pdbench, s, shipped_model, toy_bench, toy_method_flags};
use pdbench_core::pi::load_scores;
use pdbench_core::study::StudyReport;
use serde_json::json;

fn write_report(path: &Path, mos: &[(&str, f64)]) {
    let aggregates: Vec<_> = mos
        .iter()
        .map(|(m, v)| json!({"method": m, "mos": v, "histogram": [0.25, 0.25, 0.25, 0.25], "n_votes": 4}))
        .collect();
    let report = json!({"n_events": 4 * mos.len(), "aggregates": aggregates, "centered": {"scores": [], "under_rated": []}});
    std::fs::write(path, report.to_string()).unwrap();
}

fn write_scores(dir: &Path, method: &str, metric: &str, values: &[f64]) {
    let d = dir.join(method);
    std::fs::create_dir_all(&d).unwrap();
    let mut csv = String::from("# hand written\nimage_id,value\n");
    for (i, v) in values.iter().enumerate() {
        csv.push_str(&format!("img{i},{v}\n"));
    }
    std::fs::write(d.join(format!("{metric}.csv")), csv).unwrap();
}

#[test]
fn perfectly_correlated_metric_has_unit_rho_and_missing_metric_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let mos = [("a", 1.5), ("b", 2.0), ("c", 2.6), ("d", 3.1), ("e", 3.5)];
    write_report(&report, &mos);
    let scores = dir.path().join("scores");
    for (k, (m, _)) in mos.iter().enumerate() {
        let base = k as f64;
        write_scores(&scores, m, "good", &[base * base, base * base + 1.0]);
        write_scores(&scores, m, "bad", &[-base, -base - 0.5]);
        if *m != "c" {
            write_scores(&scores, m, "partial", &[1.0, 2.0]);
        }
    }
    let out = dir.path().join("out");
    ok(["analyze", "--study-report", s(&report), "--scores", s(&scores), "--out", s(&out)]);
    let corr = json(&out.join("corr_report.json"));
    assert_eq!(corr["metrics"]["good"]["method_level"]["rho"], 1.0);
    assert_eq!(corr["metrics"]["good"]["method_level"]["n"], 5);
    assert_eq!(corr["metrics"]["bad"]["method_level"]["rho"], -1.0);
    let zoomed = &corr["metrics"]["good"]["method_level"]["zoomed"];
    assert_eq!(zoomed["n"], 3);
    assert_eq!(zoomed["rho"], 1.0);
    assert_eq!(corr["skipped"][0]["metric"], "partial");
    assert!(corr["skipped"][0]["reason"].as_str().unwrap().contains('c'));
    assert!(corr["metrics"].get("partial").is_none());
    assert!(out.join("scatter/good_methods.csv").exists());

    ok(["analyze", "--study-report", s(&report), "--scores", s(&scores), "--out", s(&out), "--metric", "good,absent"]);
    let corr = json(&out.join("corr_report.json"));
    assert_eq!(corr["metrics"].as_object().unwrap().len(), 1);
    assert_eq!(corr["skipped"][0]["metric"], "absent");
}

#[test]
fn analyze_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(pdbench(["analyze", "--out", s(&out)]).code, 1);
    let report = dir.path().join("report.json");
    std::fs::write(&report, "[]").unwrap();
    let scores = dir.path().join("scores");
    std::fs::create_dir(&scores).unwrap();
    let r = pdbench(["analyze", "--study-report", s(&report), "--scores", s(&scores), "--out", s(&out)]);
    assert_eq!(r.code, 2);
}

fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    let (a, b) = (ranks(x), ranks(y));
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(p, q)| (p - ma) * (q - mb)).sum();
    let va: f64 = a.iter().map(|p| (p - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|q| (q - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn toy_pipeline_matches_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let bench = toy_bench(dir.path(), 5);
    let eval = dir.path().join("eval");
    let mut args: Vec<String> = ["evaluate", "--hr", s(&bench.join("hr")), "--model", s(&shipped_model()), "--out", s(&eval)]
        .map(String::from)
        .to_vec();
    args.extend(toy_method_flags(&bench));
    ok(args);

    let plan = dir.path().join("plan.json");
    ok(["study", "plan", "--stimuli", s(&bench.join("methods")), "--raters", "6", "--per-rater", "5", "--seed", "11", "--out", s(&plan)]);
    let log = dir.path().join("ratings.jsonl");
    common::rate_all(&plan, &log, |m| match m {
        "identity" => 4,
        "noisy" => 2,
        _ => 1,
    }, 7);
    let report = dir.path().join("report.json");
    ok(["study", "report", "--plan", s(&plan), "--log", s(&log), "--out", s(&report)]);
    let out = dir.path().join("analysis");
    ok(["analyze", "--study-report", s(&report), "--scores", s(&eval.join("scores")), "--out", s(&out)]);

    let corr = json(&out.join("corr_report.json"));
    let study: StudyReport = serde_json::from_value(json(&report)).unwrap();
    for metric in ["mse", "niqe", "ssim"] {
        let mut mos = Vec::new();
        let mut means = Vec::new();
        for a in &study.aggregates {
            let recs = load_scores(&eval.join("scores").join(&a.method).join(format!("{metric}.csv")), &a.method, metric, None).unwrap();
            mos.push(a.mos);
            means.push(recs.iter().map(|r| r.value).sum::<f64>() / recs.len() as f64);
        }
        let got = &corr["metrics"][metric]["method_level"];
        assert!((got["rho"].as_f64().unwrap() - spearman_oracle(&mos, &means)).abs() < 1e-12, "{metric}");
        assert_eq!(got["n"], 3);
        assert_eq!(corr["metrics"][metric]["image_level"]["n"], 15);
    }
    assert_eq!(corr["skipped"][0]["metric"], "psnr");
    assert_eq!(corr["metrics"]["ssim"]["method_level"]["rho"], 1.0);
    assert_eq!(corr["metrics"]["mse"]["method_level"]["rho"], -1.0);
}
