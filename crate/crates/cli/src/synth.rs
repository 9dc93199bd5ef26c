use std::path::{Path, PathBuf};

use clap::Args;
use pdbench_core::filter::gaussian_blur;
use pdbench_core::image::{load_image, Plane, RgbImage};
use pdbench_core::synth::{add_noise, natural_rgb};
use serde::{Deserialize, Serialize};

use crate::config::{layered, png_path, png_stems, to_json, write_file, Provenance};
use crate::error::{invalid, require, require_dir, runtime, CliError, Result};

pub const DEFAULT_COUNT: usize = 5;
pub const DEFAULT_SIZE: usize = 128;
pub const DEFAULT_BLUR: f64 = 2.0;
pub const DEFAULT_NOISE: f64 = 8.0;
pub const TOY_METHODS: [&str; 3] = ["identity", "blurred", "noisy"];

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthArgs {
    /// Take HR images from this directory instead of generating them.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Side length of generated images.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub blur_sigma: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

layered!(SynthArgs { from, count, size, blur_sigma, noise_sigma, out } paths { from, out });

#[derive(Serialize)]
struct Manifest<'a> {
    provenance: &'a Provenance,
    images: &'a [String],
    methods: &'a [&'a str],
    blur_sigma: f64,
    noise_sigma: f64,
}

pub fn blur_rgb(img: &RgbImage, sigma: f64) -> Result<RgbImage> {
    let [r, g, b]: [Plane<f64>; 3] = img.channels();
    RgbImage::from_channels(&[gaussian_blur(&r, sigma), gaussian_blur(&g, sigma), gaussian_blur(&b, sigma)])
        .map_err(runtime)
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(runtime)?;
    }
    img.save_png(path).map_err(runtime)
}

/// Writes `hr/` and `methods/{identity,blurred,noisy}/` under the output directory.
pub fn run(args: SynthArgs, seed: u64) -> Result<()> {
    let out = require(args.out.clone(), "out")?;
    let count = args.count.unwrap_or(DEFAULT_COUNT);
    let size = args.size.unwrap_or(DEFAULT_SIZE);
    let blur_sigma = args.blur_sigma.unwrap_or(DEFAULT_BLUR);
    let noise_sigma = args.noise_sigma.unwrap_or(DEFAULT_NOISE);
    if count == 0 {
        return Err(invalid("--count must be at least 1"));
    }
    if size < 32 {
        return Err(invalid("--size must be at least 32"));
    }
    if !(blur_sigma > 0.0 && noise_sigma > 0.0) {
        return Err(invalid("blur and noise sigmas must be positive"));
    }

    let sources: Vec<(String, RgbImage)> = match &args.from {
        Some(dir) => {
            require_dir(dir, "source")?;
            let stems = png_stems(dir)?;
            if stems.len() < count {
                return Err(CliError::Runtime(format!(
                    "{} holds {} PNG images, {count} requested",
                    dir.display(),
                    stems.len()
                )));
            }
            stems[..count]
                .iter()
                .map(|s| Ok((s.clone(), load_image(&png_path(dir, s).expect("listed")).map_err(runtime)?)))
                .collect::<Result<_>>()?
        }
        None => (0..count)
            .map(|k| (format!("img{k:03}"), natural_rgb(size, size, seed.wrapping_add(k as u64))))
            .collect(),
    };

    for (k, (stem, hr)) in sources.iter().enumerate() {
        let file = format!("{stem}.png");
        save(hr, &out.join("hr").join(&file))?;
        let methods = out.join("methods");
        save(hr, &methods.join("identity").join(&file))?;
        save(&blur_rgb(hr, blur_sigma)?, &methods.join("blurred").join(&file))?;
        let noisy = add_noise(hr, noise_sigma, seed.wrapping_mul(31).wrapping_add(k as u64));
        save(&noisy, &methods.join("noisy").join(&file))?;
    }
    let images: Vec<String> = sources.into_iter().map(|(s, _)| s).collect();
    let provenance = Provenance::new("synth", &args, seed);
    let manifest = Manifest {
        provenance: &provenance,
        images: &images,
        methods: &TOY_METHODS,
        blur_sigma,
        noise_sigma,
    };
    write_file(&out.join("manifest.json"), to_json(&manifest)?)
}
