use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::Args;
use pdbench_core::analysis::{
    analyze_metric, correlate, image_level_table, method_level_table, AnalysisPoint, MetricReport, DEFAULT_ZOOM_THRESHOLD,
};
use pdbench_core::pi::load_scores;
use pdbench_core::study::StudyReport;
use serde::{Deserialize, Serialize};

use crate::config::{layered, to_json, write_file, Provenance};
use crate::error::{invalid, io_at, require, require_dir, require_file, runtime, CliError, Result};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeArgs {
    /// Report written by `study report`.
    #[arg(long)]
    pub study_report: Option<PathBuf>,
    /// Score tree `{method}/{metric}.csv`, as written by `evaluate`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Metrics to analyze, comma separated (default: every metric found).
    #[arg(long = "metric", value_delimiter = ',')]
    pub metrics: Option<Vec<String>>,
    /// MOS threshold of the high-quality zoom.
    #[arg(long)]
    pub zoom: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

layered!(AnalyzeArgs { study_report, scores, metrics, zoom, out } paths { study_report, scores, out });

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricAnalysis {
    pub method_level: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method_level_error: Option<String>,
    pub image_level: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_level_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedMetric {
    pub metric: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrReport {
    pub provenance: Provenance,
    pub zoom_threshold: f64,
    pub methods: Vec<String>,
    pub metrics: BTreeMap<String, MetricAnalysis>,
    pub skipped: Vec<SkippedMetric>,
}

fn discover_metrics(scores: &Path, methods: &[String]) -> Result<Vec<String>> {
    let mut found = BTreeSet::new();
    for m in methods {
        let dir = scores.join(m);
        if !dir.is_dir() {
            continue;
        }
        for entry in std::fs::read_dir(&dir).map_err(io_at(&dir))? {
            let path = entry.map_err(io_at(&dir))?.path();
            if path.extension().is_some_and(|e| e == "csv") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    found.insert(stem.to_string());
                }
            }
        }
    }
    Ok(found.into_iter().collect())
}

type PerImage = BTreeMap<(String, String), f64>;

fn load_metric(scores: &Path, methods: &[String], metric: &str) -> std::result::Result<PerImage, String> {
    let missing: Vec<&str> = methods
        .iter()
        .filter(|m| !scores.join(m).join(format!("{metric}.csv")).is_file())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(format!("no score file for method(s) {}", missing.join(", ")));
    }
    let mut values = PerImage::new();
    for m in methods {
        let path = scores.join(m).join(format!("{metric}.csv"));
        for r in load_scores(&path, m, metric, None).map_err(|e| e.to_string())? {
            values.insert((r.method, r.image_id), r.value);
        }
    }
    Ok(values)
}

fn scatter_csv(provenance: &Provenance, header: &[&str], points: &[AnalysisPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(provenance.csv_comment().into_bytes());
    w.write_record(header).map_err(runtime)?;
    for p in points {
        let mut row = vec![p.method.clone()];
        row.extend(p.image_id.clone());
        row.push(p.mos.to_string());
        row.push(p.metric_value.to_string());
        w.write_record(&row).map_err(runtime)?;
    }
    w.into_inner().map_err(runtime)
}

pub fn run(args: AnalyzeArgs, seed: u64) -> Result<()> {
    let report_path = require(args.study_report.clone(), "study-report")?;
    let scores = require(args.scores.clone(), "scores")?;
    let out = require(args.out.clone(), "out")?;
    require_file(&report_path, "study report")?;
    require_dir(&scores, "scores")?;
    let zoom = args.zoom.unwrap_or(DEFAULT_ZOOM_THRESHOLD);
    if zoom.is_nan() {
        return Err(invalid("--zoom must be a number"));
    }
    let text = std::fs::read_to_string(&report_path).map_err(io_at(&report_path))?;
    let study: StudyReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("{}: malformed study report: {e}", report_path.display())))?;
    let methods: Vec<String> = study.aggregates.iter().map(|a| a.method.clone()).collect();
    if methods.is_empty() {
        return Err(CliError::Runtime("the study report holds no ratings".into()));
    }
    let metrics = match &args.metrics {
        Some(m) => m.clone(),
        None => discover_metrics(&scores, &methods)?,
    };

    let provenance = Provenance::new("analyze", &args, seed);
    let mut report = CorrReport {
        provenance: provenance.clone(),
        zoom_threshold: zoom,
        methods: methods.clone(),
        metrics: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for metric in &metrics {
        let values = match load_metric(&scores, &methods, metric) {
            Ok(v) => v,
            Err(reason) => {
                eprintln!("skipping {metric}: {reason}");
                report.skipped.push(SkippedMetric {
                    metric: metric.clone(),
                    reason,
                });
                continue;
            }
        };
        let mut per_method: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for ((m, _), v) in &values {
            let e = per_method.entry(m.clone()).or_default();
            e.0 += v;
            e.1 += 1;
        }
        let means: BTreeMap<String, f64> = per_method.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect();

        let mut entry = MetricAnalysis::default();
        match method_level_table(&study.aggregates, &means) {
            Ok(points) => {
                let csv = scatter_csv(&provenance, &["method", "mos", "value"], &points)?;
                write_file(&out.join("scatter").join(format!("{metric}_methods.csv")), csv)?;
                match analyze_metric(metric, &points, zoom) {
                    Ok(r) => entry.method_level = Some(r),
                    Err(e) => entry.method_level_error = Some(e.to_string()),
                }
            }
            Err(e) => entry.method_level_error = Some(e.to_string()),
        }
        match image_level_table(&study.centered, &values) {
            Ok(points) => {
                let csv = scatter_csv(&provenance, &["method", "image_id", "centered_mos", "centered_value"], &points)?;
                write_file(&out.join("scatter").join(format!("{metric}_images.csv")), csv)?;
                match correlate(metric, &points) {
                    Ok(r) => {
                        entry.image_level = Some(MetricReport {
                            rho: r.rho,
                            n: r.n,
                            fit_slope: r.fit_slope,
                            fit_intercept: r.fit_intercept,
                            zoomed: None,
                            zoom_error: None,
                        })
                    }
                    Err(e) => entry.image_level_error = Some(e.to_string()),
                }
            }
            Err(e) => entry.image_level_error = Some(e.to_string()),
        }
        if let Some(r) = &entry.method_level {
            eprintln!("{metric}: rho {:.4} over {} methods", r.rho, r.n);
        }
        report.metrics.insert(metric.clone(), entry);
    }
    write_file(&out.join("corr_report.json"), to_json(&report)?)
}
