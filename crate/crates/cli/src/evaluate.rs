use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use pdbench_core::image::{crop_border, load_image, rgb_to_y, LumaMatrix};
use pdbench_core::leaderboard::{assign_region, RegionSpec, SubmissionSummary};
use pdbench_core::metrics::{mse_y, psnr_from_mse, rmse_from_mses, ssim};
use pdbench_core::niqe::niqe_score;
use pdbench_core::pi::{dataset_pi, load_scores, perceptual_index, MetricRecord, ScoreSet, MA, NIQE};
use pdbench_core::{ImagePair, MvgModel, YPlane};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{layered, png_path, png_stems, to_json, write_file, Provenance};
use crate::error::{invalid, require, require_dir, require_file, runtime, CliError, Result};

pub const DEFAULT_BORDER: usize = 4;

/// Per-image metrics written for every method, in output order.
pub const METRICS: [&str; 6] = ["mse", "psnr", "ssim", NIQE, MA, "pi"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Luma {
    #[default]
    Bt601Studio,
    Bt601Full,
}

impl From<Luma> for LumaMatrix {
    fn from(l: Luma) -> Self {
        match l {
            Luma::Bt601Studio => LumaMatrix::Bt601Studio,
            Luma::Bt601Full => LumaMatrix::Bt601Full,
        }
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateArgs {
    /// Directory of ground-truth PNGs.
    #[arg(long)]
    pub hr: Option<PathBuf>,
    /// Super-resolved outputs as NAME=DIR; repeatable. Files match HR by stem.
    #[arg(long = "method", value_name = "NAME=DIR")]
    pub methods: Option<Vec<String>>,
    /// Pristine NIQE model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory of externally computed Ma scores, one `{method}.csv` per method.
    #[arg(long)]
    pub ma: Option<PathBuf>,
    /// Pixels cropped from each side before scoring.
    #[arg(long)]
    pub border: Option<usize>,
    #[arg(long, value_enum)]
    pub luma: Option<Luma>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

layered!(EvaluateArgs { hr, methods, model, ma, border, luma, workers, out } paths { hr, model, ma, out });

/// Dataset-level results of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub images: usize,
    pub rmse: f64,
    pub region: Option<u8>,
    pub mean_ssim: f64,
    pub mean_niqe: f64,
    pub mean_ma: Option<f64>,
    /// Absent without Ma scores.
    pub pi: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryFile {
    pub provenance: Provenance,
    pub methods: Vec<MethodSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubmissionsFile {
    pub provenance: Provenance,
    pub submissions: Vec<SubmissionSummary>,
}

#[derive(Clone, Copy, Debug)]
struct ImageScores {
    mse: f64,
    ssim: f64,
    niqe: f64,
}

pub fn parse_method_spec(spec: &str) -> Result<(String, PathBuf)> {
    let (name, dir) = spec
        .split_once('=')
        .ok_or_else(|| invalid(format!("--method expects NAME=DIR, got `{spec}`")))?;
    let name = name.trim();
    let valid = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && name != "."
        && name != "..";
    if !valid {
        return Err(invalid(format!("invalid method name `{name}`")));
    }
    Ok((name.to_string(), PathBuf::from(dir)))
}

pub fn load_y(path: &Path, luma: LumaMatrix, border: usize) -> Result<YPlane> {
    let img = load_image(path).map_err(runtime)?;
    crop_border(&rgb_to_y::<f64>(&img, luma), border).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn run(args: EvaluateArgs, seed: u64) -> Result<()> {
    let hr = require(args.hr.clone(), "hr")?;
    let model_path = require(args.model.clone(), "model")?;
    let out = require(args.out.clone(), "out")?;
    let specs = args.methods.clone().unwrap_or_default();
    if specs.is_empty() {
        return Err(invalid("at least one --method NAME=DIR is required"));
    }
    let mut methods: Vec<(String, PathBuf)> = Vec::new();
    for s in &specs {
        let (name, dir) = parse_method_spec(s)?;
        if methods.iter().any(|(n, _)| *n == name) {
            return Err(invalid(format!("method `{name}` given twice")));
        }
        methods.push((name, dir));
    }
    require_dir(&hr, "HR")?;
    require_file(&model_path, "model")?;
    for (name, dir) in &methods {
        require_dir(dir, &format!("method `{name}`"))?;
    }
    if let Some(ma) = &args.ma {
        require_dir(ma, "Ma score")?;
    }
    if args.workers == Some(0) {
        return Err(invalid("--workers must be at least 1"));
    }
    let border = args.border.unwrap_or(DEFAULT_BORDER);
    let luma: LumaMatrix = args.luma.unwrap_or_default().into();

    let model = MvgModel::load(&model_path).map_err(|e| CliError::Runtime(format!("{}: {e}", model_path.display())))?;
    let stems = png_stems(&hr)?;
    if stems.is_empty() {
        return Err(CliError::Runtime(format!("no PNG images in {}", hr.display())));
    }
    let mut sr_paths: Vec<Vec<PathBuf>> = Vec::new();
    for (name, dir) in &methods {
        let mut paths = Vec::new();
        let mut missing = Vec::new();
        for stem in &stems {
            match png_path(dir, stem) {
                Some(p) => paths.push(p),
                None => missing.push(stem.as_str()),
            }
        }
        if !missing.is_empty() {
            return Err(CliError::Runtime(format!(
                "method `{name}` lacks counterpart images for stem(s): {}",
                missing.join(", ")
            )));
        }
        sr_paths.push(paths);
    }

    let mut ma_records = Vec::new();
    match &args.ma {
        Some(dir) => {
            for (name, _) in &methods {
                let path = dir.join(format!("{name}.csv"));
                ma_records.extend(load_scores(&path, name, MA, Some(&stems)).map_err(runtime)?);
            }
        }
        None => eprintln!(
            "note: no Ma scores given (--ma). Ma is an external learned metric this tool does not compute; \
             the perceptual index is omitted from every output."
        ),
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(runtime)?;
    let per_method: Vec<Vec<ImageScores>> = pool.install(|| -> Result<Vec<Vec<ImageScores>>> {
        let hr_planes: Vec<YPlane> = stems
            .par_iter()
            .map(|stem| load_y(&png_path(&hr, stem).expect("listed above"), luma, border))
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, usize)> = (0..methods.len())
            .flat_map(|m| (0..stems.len()).map(move |i| (m, i)))
            .collect();
        let scores: Vec<ImageScores> = jobs
            .par_iter()
            .map(|&(m, i)| {
                let sr = load_y(&sr_paths[m][i], luma, border)?;
                let label = |e: &dyn std::fmt::Display| CliError::Runtime(format!("{} / {}: {e}", methods[m].0, stems[i]));
                let niqe = niqe_score(&sr, &model).map_err(|e| label(&e))?;
                let pair = ImagePair::new(hr_planes[i].clone(), sr).map_err(|e| label(&e))?;
                Ok(ImageScores {
                    mse: mse_y(&pair),
                    ssim: ssim(&pair).map_err(|e| label(&e))?,
                    niqe,
                })
            })
            .collect::<Result<_>>()?;
        Ok(scores.chunks(stems.len()).map(<[ImageScores]>::to_vec).collect())
    })?;

    let mut set = ScoreSet::new(stems.clone());
    set.extend(ma_records).map_err(runtime)?;
    let mut records: Vec<MetricRecord> = Vec::new();
    let mut summaries = Vec::new();
    let spec = RegionSpec::default();
    for ((name, _), scores) in methods.iter().zip(&per_method) {
        for (stem, s) in stems.iter().zip(scores) {
            set.insert(MetricRecord {
                method: name.clone(),
                image_id: stem.clone(),
                metric: NIQE.into(),
                value: s.niqe,
            })
            .map_err(runtime)?;
        }
        let has_ma = args.ma.is_some();
        let pi = if has_ma { Some(dataset_pi(&set, name).map_err(runtime)?) } else { None };
        let ma_values = if has_ma { Some(set.roster_values(name, MA).map_err(runtime)?) } else { None };
        for (i, (stem, s)) in stems.iter().zip(scores).enumerate() {
            let ma = ma_values.as_ref().map(|v| v[i]);
            let values = [
                Some(s.mse),
                Some(psnr_from_mse(s.mse)),
                Some(s.ssim),
                Some(s.niqe),
                ma,
                ma.map(|m| perceptual_index(m, s.niqe)),
            ];
            for (metric, value) in METRICS.iter().zip(values) {
                if let Some(value) = value {
                    records.push(MetricRecord {
                        method: name.clone(),
                        image_id: stem.clone(),
                        metric: metric.to_string(),
                        value,
                    });
                }
            }
        }
        let mses: Vec<f64> = scores.iter().map(|s| s.mse).collect();
        let rmse = rmse_from_mses(&mses).map_err(runtime)?;
        let n = scores.len() as f64;
        summaries.push(MethodSummary {
            method: name.clone(),
            images: scores.len(),
            rmse,
            region: assign_region(rmse, &spec),
            mean_ssim: scores.iter().map(|s| s.ssim).sum::<f64>() / n,
            mean_niqe: scores.iter().map(|s| s.niqe).sum::<f64>() / n,
            mean_ma: ma_values.as_ref().map(|v| v.iter().sum::<f64>() / n),
            pi,
        });
    }

    let provenance = Provenance::new("evaluate", &args, seed);
    write_outputs(&out, &provenance, &records, &summaries)?;
    for s in &summaries {
        let pi = s.pi.map(|p| format!("{p:.4}")).unwrap_or_else(|| "n/a".into());
        eprintln!(
            "{}: RMSE {:.4}  SSIM {:.4}  NIQE {:.4}  PI {pi}",
            s.method, s.rmse, s.mean_ssim, s.mean_niqe
        );
    }
    Ok(())
}

fn write_outputs(out: &Path, provenance: &Provenance, records: &[MetricRecord], summaries: &[MethodSummary]) -> Result<()> {
    let mut table = csv::Writer::from_writer(provenance.csv_comment().into_bytes());
    table.write_record(["method", "image_id", "metric", "value"]).map_err(runtime)?;
    for r in records {
        table
            .write_record([&r.method, &r.image_id, &r.metric, &r.value.to_string()])
            .map_err(runtime)?;
    }
    write_file(&out.join("scores.csv"), table.into_inner().map_err(runtime)?)?;

    let mut per_file: BTreeMap<(&str, &str), Vec<&MetricRecord>> = BTreeMap::new();
    for r in records {
        per_file.entry((&r.method, &r.metric)).or_default().push(r);
    }
    for ((method, metric), rows) in per_file {
        let mut w = csv::Writer::from_writer(provenance.csv_comment().into_bytes());
        w.write_record(["image_id", "value"]).map_err(runtime)?;
        for r in rows {
            w.write_record([&r.image_id, &r.value.to_string()]).map_err(runtime)?;
        }
        let path = out.join("scores").join(method).join(format!("{metric}.csv"));
        write_file(&path, w.into_inner().map_err(runtime)?)?;
    }

    let summary = SummaryFile {
        provenance: provenance.clone(),
        methods: summaries.to_vec(),
    };
    write_file(&out.join("summary.json"), to_json(&summary)?)?;

    let submissions: Option<Vec<SubmissionSummary>> = summaries
        .iter()
        .map(|s| s.pi.map(|pi| SubmissionSummary::new(s.method.clone(), pi, s.rmse)))
        .collect();
    let path = out.join("submissions.json");
    match submissions {
        Some(submissions) => write_file(
            &path,
            to_json(&SubmissionsFile {
                provenance: provenance.clone(),
                submissions,
            })?,
        )?,
        None if path.exists() => std::fs::remove_file(&path).map_err(runtime)?,
        None => {}
    }
    Ok(())
}
