use std::path::PathBuf;

use clap::{Args, Subcommand};
use pdbench_core::image::LumaMatrix;
use pdbench_core::niqe::{fit_pristine_model, niqe_score, PatchParams, DEFAULT_PATCH, DEFAULT_SHARPNESS_FRAC};
use pdbench_core::{MvgModel, YPlane};
use serde::{Deserialize, Serialize};

use crate::config::{layered, png_path, png_stems, to_json, write_file, Provenance};
use crate::error::{invalid, require, require_dir, require_file, runtime, CliError, Result};
use crate::evaluate::{load_y, Luma};

#[derive(Subcommand, Debug)]
pub enum NiqeCommand {
    /// Fit a pristine model on a corpus of natural images.
    Train(TrainArgs),
    /// Score images against a pristine model.
    Score(ScoreArgs),
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    /// Directory of pristine PNGs.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub patch: Option<usize>,
    /// Keep patches whose sharpness is at least this fraction of the sharpest.
    #[arg(long)]
    pub sharpness: Option<f64>,
    #[arg(long, value_enum)]
    pub luma: Option<Luma>,
}

layered!(TrainArgs { corpus, out, patch, sharpness, luma } paths { corpus, out });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Pixels cropped from each side before scoring.
    #[arg(long)]
    pub border: Option<usize>,
    #[arg(long, value_enum)]
    pub luma: Option<Luma>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[arg(required = true)]
    #[serde(skip_deserializing)]
    pub images: Vec<PathBuf>,
}

layered!(ScoreArgs { model, border, luma, out } paths { model, out });

#[derive(Serialize)]
struct ModelFile<'a> {
    #[serde(flatten)]
    model: &'a MvgModel,
    provenance: &'a Provenance,
}

pub fn train(args: TrainArgs, seed: u64) -> Result<()> {
    let corpus = require(args.corpus.clone(), "corpus")?;
    let out = require(args.out.clone(), "out")?;
    require_dir(&corpus, "corpus")?;
    let patch = args.patch.unwrap_or(DEFAULT_PATCH);
    let sharpness_frac = args.sharpness.unwrap_or(DEFAULT_SHARPNESS_FRAC);
    if patch < 20 || !patch.is_multiple_of(2) {
        return Err(invalid(format!("--patch must be an even number of at least 20, got {patch}")));
    }
    if !(0.0..=1.0).contains(&sharpness_frac) {
        return Err(invalid(format!("--sharpness must lie in [0, 1], got {sharpness_frac}")));
    }
    let luma: LumaMatrix = args.luma.unwrap_or_default().into();
    let stems = png_stems(&corpus)?;
    if stems.is_empty() {
        return Err(CliError::Runtime(format!("no PNG images in {}", corpus.display())));
    }
    let planes: Vec<YPlane> = stems
        .iter()
        .map(|s| load_y(&png_path(&corpus, s).expect("listed"), luma, 0))
        .collect::<Result<_>>()?;
    let model = fit_pristine_model(&planes, PatchParams { patch, sharpness_frac }).map_err(runtime)?;
    let provenance = Provenance::new("niqe train", &args, seed);
    write_file(&out, to_json(&ModelFile { model: &model, provenance: &provenance })?)?;
    eprintln!(
        "trained on {} images, {} patches -> {}",
        stems.len(),
        model.patch_count,
        out.display()
    );
    Ok(())
}

pub fn score(args: ScoreArgs, seed: u64) -> Result<()> {
    let model_path = require(args.model.clone(), "model")?;
    require_file(&model_path, "model")?;
    for img in &args.images {
        require_file(img, "image")?;
    }
    let luma: LumaMatrix = args.luma.unwrap_or_default().into();
    let border = args.border.unwrap_or(0);
    let model = MvgModel::load(&model_path).map_err(runtime)?;
    let provenance = Provenance::new("niqe score", &args, seed);
    let mut w = csv::Writer::from_writer(provenance.csv_comment().into_bytes());
    w.write_record(["image", "niqe"]).map_err(runtime)?;
    for img in &args.images {
        let y = load_y(img, luma, border)?;
        let q = niqe_score(&y, &model).map_err(|e| CliError::Runtime(format!("{}: {e}", img.display())))?;
        w.write_record([img.display().to_string(), q.to_string()]).map_err(runtime)?;
    }
    let bytes = w.into_inner().map_err(runtime)?;
    match &args.out {
        Some(out) => write_file(out, bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(runtime)
        }
    }
}
