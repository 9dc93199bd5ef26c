use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use pdbench_core::leaderboard::{
    markdown_table, partition_by_region, plane_export, rank, write_scatter_csv, Margins, RankedEntry, RegionSpec,
    SubmissionSummary, DEFAULT_EPS_PI, DEFAULT_EPS_RMSE, DEFAULT_THRESHOLDS,
};
use serde::{Deserialize, Serialize};

use crate::config::{layered, to_json, write_file, Provenance};
use crate::error::{invalid, io_at, require, require_file, runtime, CliError, Result};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankArgs {
    /// JSON array of {team, pi, rmse[, region]}, or an object with a `submissions` array.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Rank only this region (1, 2 or 3).
    #[arg(long)]
    pub region: Option<u8>,
    #[arg(long)]
    pub eps_pi: Option<f64>,
    #[arg(long)]
    pub eps_rmse: Option<f64>,
    /// Three increasing RMSE upper bounds, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub thresholds: Option<Vec<f64>>,
    /// Output directory; without it the leaderboard is printed.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

layered!(RankArgs { input, region, eps_pi, eps_rmse, thresholds, out } paths { input, out });

#[derive(Deserialize)]
#[serde(untagged)]
enum InputFile {
    Bare(Vec<SubmissionSummary>),
    Wrapped { submissions: Vec<SubmissionSummary> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcludedEntry {
    pub submission: SubmissionSummary,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeaderboardFile {
    pub provenance: Provenance,
    pub eps_pi: f64,
    pub eps_rmse: f64,
    pub thresholds: [f64; 3],
    pub regions: BTreeMap<u8, Vec<RankedEntry>>,
    pub excluded: Vec<ExcludedEntry>,
}

pub fn run(args: RankArgs, seed: u64) -> Result<()> {
    let input = require(args.input.clone(), "input")?;
    require_file(&input, "input")?;
    if let Some(r) = args.region {
        if !(1..=3).contains(&r) {
            return Err(invalid(format!("--region must be 1, 2 or 3, got {r}")));
        }
    }
    let margins = Margins {
        eps_pi: args.eps_pi.unwrap_or(DEFAULT_EPS_PI),
        eps_rmse: args.eps_rmse.unwrap_or(DEFAULT_EPS_RMSE),
    };
    if [margins.eps_pi, margins.eps_rmse].iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(invalid("margins must be finite and non-negative"));
    }
    let thresholds = match &args.thresholds {
        None => DEFAULT_THRESHOLDS,
        Some(t) => <[f64; 3]>::try_from(t.as_slice()).map_err(|_| invalid("--thresholds takes exactly three values"))?,
    };
    let spec = RegionSpec::new(thresholds).map_err(|e| invalid(e.to_string()))?;

    let text = std::fs::read_to_string(&input).map_err(io_at(&input))?;
    let entries = match serde_json::from_str::<InputFile>(&text) {
        Ok(InputFile::Bare(v)) | Ok(InputFile::Wrapped { submissions: v }) => v,
        Err(e) => return Err(CliError::Runtime(format!("{}: malformed submissions: {e}", input.display()))),
    };
    let part = partition_by_region(&entries, &spec).map_err(runtime)?;
    let selected: Vec<u8> = match args.region {
        Some(r) => vec![r],
        None => vec![1, 2, 3],
    };
    let mut regions = BTreeMap::new();
    for r in &selected {
        let ranked = match part.regions.get(r) {
            Some(entries) => rank(entries, margins).map_err(runtime)?,
            None => Vec::new(),
        };
        regions.insert(*r, ranked);
    }

    let provenance = Provenance::new("rank", &args, seed);
    let mut md = provenance.markdown_comment();
    md.push_str("\n# Leaderboard\n");
    for (r, ranked) in &regions {
        md.push('\n');
        md.push_str(&markdown_table(*r, ranked));
    }
    if !part.excluded.is_empty() {
        md.push_str("\n## Excluded\n\n");
        for (s, reason) in &part.excluded {
            md.push_str(&format!("- {}: {reason}\n", s.team));
        }
    }

    let Some(out) = args.out else {
        print!("{md}");
        return Ok(());
    };
    write_file(&out.join("leaderboard.md"), &md)?;

    let in_scope: Vec<SubmissionSummary> = regions
        .values()
        .flatten()
        .map(|e| e.submission.clone())
        .chain(part.excluded.iter().map(|(s, _)| s.clone()))
        .collect();
    let mut plane = provenance.csv_comment().into_bytes();
    write_scatter_csv(&plane_export(&in_scope, &spec), &mut plane).map_err(runtime)?;
    write_file(&out.join("plane.csv"), plane)?;

    let file = LeaderboardFile {
        provenance,
        eps_pi: margins.eps_pi,
        eps_rmse: margins.eps_rmse,
        thresholds,
        regions,
        excluded: part
            .excluded
            .into_iter()
            .map(|(submission, reason)| ExcludedEntry { submission, reason })
            .collect(),
    };
    write_file(&out.join("leaderboard.json"), to_json(&file)?)
}
