//! Region assignment and ranking on the perception-distortion plane.
//!
//! Within a region, submissions are ordered by perceptual index. When two
//! indices differ by at most `eps_pi` the lower RMSE ranks higher, and when
//! the RMSEs also differ by at most `eps_rmse` the submissions share a rank.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [11.5, 12.5, 16.0];
pub const DEFAULT_EPS_PI: f64 = 0.01;
pub const DEFAULT_EPS_RMSE: f64 = 0.05;

/// Absorbs binary representation error of decimal scores, so that published
/// values three decimals apart compare equal to a 0.01 margin.
pub const MARGIN_SLACK: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("nothing to rank")]
    Empty,
    #[error("region thresholds must be positive and strictly increasing: {0:?}")]
    BadThresholds([f64; 3]),
    #[error("margins must be finite and non-negative (eps_pi {eps_pi}, eps_rmse {eps_rmse})")]
    BadMargins { eps_pi: f64, eps_rmse: f64 },
    #[error("team `{team}` has invalid scores (pi {pi}, rmse {rmse})")]
    BadScores { team: String, pi: f64, rmse: f64 },
    #[error("team `{0}` appears more than once")]
    DuplicateTeam(String),
    #[error("invalid region {0}, expected 1, 2 or 3")]
    BadRegion(u8),
    #[error("malformed submissions file: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionSpec {
    thresholds: [f64; 3],
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self {
            thresholds: DEFAULT_THRESHOLDS,
        }
    }
}

impl RegionSpec {
    pub fn new(thresholds: [f64; 3]) -> Result<Self, RankError> {
        let ok = thresholds.iter().all(|t| t.is_finite() && *t > 0.0)
            && thresholds.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(RankError::BadThresholds(thresholds));
        }
        Ok(Self { thresholds })
    }

    pub fn thresholds(&self) -> [f64; 3] {
        self.thresholds
    }
}

/// Smallest region whose threshold admits `rmse` (bands are disjoint and
/// inclusive at the top). `None` when above the last threshold.
pub fn assign_region(rmse: f64, spec: &RegionSpec) -> Option<u8> {
    spec.thresholds
        .iter()
        .position(|&t| rmse <= t)
        .map(|k| k as u8 + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmissionSummary {
    pub team: String,
    /// Region the submission was entered for, when known.
    #[serde(default, rename = "region", skip_serializing_if = "Option::is_none")]
    pub region_target: Option<u8>,
    pub pi: f64,
    pub rmse: f64,
}

impl SubmissionSummary {
    pub fn new(team: impl Into<String>, pi: f64, rmse: f64) -> Self {
        Self {
            team: team.into(),
            region_target: None,
            pi,
            rmse,
        }
    }

    /// A negative perceptual index is legal input but almost certainly a
    /// scoring mistake upstream.
    pub fn has_negative_pi(&self) -> bool {
        self.pi < 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margins {
    pub eps_pi: f64,
    pub eps_rmse: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Self {
            eps_pi: DEFAULT_EPS_PI,
            eps_rmse: DEFAULT_EPS_RMSE,
        }
    }
}

impl Margins {
    fn validate(&self) -> Result<(), RankError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.eps_pi) || !ok(self.eps_rmse) {
            return Err(RankError::BadMargins {
                eps_pi: self.eps_pi,
                eps_rmse: self.eps_rmse,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub tied: bool,
    pub submission: SubmissionSummary,
}

fn within(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps + MARGIN_SLACK
}

fn by_pi(a: &SubmissionSummary, b: &SubmissionSummary) -> Ordering {
    a.pi.total_cmp(&b.pi)
        .then(a.rmse.total_cmp(&b.rmse))
        .then_with(|| a.team.cmp(&b.team))
}

fn by_rmse(a: &SubmissionSummary, b: &SubmissionSummary) -> Ordering {
    a.rmse
        .total_cmp(&b.rmse)
        .then(a.pi.total_cmp(&b.pi))
        .then_with(|| a.team.cmp(&b.team))
}

/// Splits a sorted slice into maximal runs whose members all lie within `eps`
/// of the run's first member, so every pair in a run is within `eps`.
fn anchored_runs<T>(items: &[T], key: impl Fn(&T) -> f64, eps: f64) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut start = 0;
    while start < items.len() {
        let anchor = key(&items[start]);
        let mut end = start + 1;
        while end < items.len() && within(key(&items[end]), anchor, eps) {
            end += 1;
        }
        runs.push(start..end);
        start = end;
    }
    runs
}

/// Ranks submissions that compete in one region.
pub fn rank(entries: &[SubmissionSummary], margins: Margins) -> Result<Vec<RankedEntry>, RankError> {
    if entries.is_empty() {
        return Err(RankError::Empty);
    }
    margins.validate()?;
    let mut teams = BTreeSet::new();
    for e in entries {
        if !e.pi.is_finite() || !e.rmse.is_finite() || e.rmse < 0.0 {
            return Err(RankError::BadScores {
                team: e.team.clone(),
                pi: e.pi,
                rmse: e.rmse,
            });
        }
        if !teams.insert(e.team.as_str()) {
            return Err(RankError::DuplicateTeam(e.team.clone()));
        }
    }

    let mut sorted = entries.to_vec();
    sorted.sort_by(by_pi);

    let mut out = Vec::with_capacity(sorted.len());
    for pi_run in anchored_runs(&sorted, |s| s.pi, margins.eps_pi) {
        let mut marginal = sorted[pi_run].to_vec();
        marginal.sort_by(by_rmse);
        for tie_run in anchored_runs(&marginal, |s| s.rmse, margins.eps_rmse) {
            let mut group = marginal[tie_run].to_vec();
            group.sort_by(by_pi);
            let rank = out.len() + 1;
            let tied = group.len() > 1;
            out.extend(group.into_iter().map(|submission| RankedEntry {
                rank,
                tied,
                submission,
            }));
        }
    }
    Ok(out)
}

/// Submissions grouped by the region their RMSE places them in. Entries above
/// the last threshold, or whose declared region disagrees with their RMSE,
/// are returned separately with a reason.
#[derive(Clone, Debug, Default)]
pub struct RegionPartition {
    pub regions: BTreeMap<u8, Vec<SubmissionSummary>>,
    pub excluded: Vec<(SubmissionSummary, String)>,
}

pub fn partition_by_region(entries: &[SubmissionSummary], spec: &RegionSpec) -> Result<RegionPartition, RankError> {
    let mut part = RegionPartition::default();
    for e in entries {
        if let Some(t) = e.region_target {
            if !(1..=3).contains(&t) {
                return Err(RankError::BadRegion(t));
            }
        }
        match (assign_region(e.rmse, spec), e.region_target) {
            (None, _) => part.excluded.push((
                e.clone(),
                format!("RMSE {} exceeds the last threshold {}", e.rmse, spec.thresholds[2]),
            )),
            (Some(actual), Some(target)) if actual != target => part.excluded.push((
                e.clone(),
                format!("entered for region {target} but RMSE {} places it in region {actual}", e.rmse),
            )),
            (Some(actual), _) => part.regions.entry(actual).or_default().push(e.clone()),
        }
    }
    Ok(part)
}

pub fn parse_submissions(text: &str) -> Result<Vec<SubmissionSummary>, RankError> {
    serde_json::from_str(text).map_err(|e| RankError::Parse(e.to_string()))
}

/// Markdown table for one region's ranking. Tied ranks carry a `*`.
pub fn markdown_table(region: u8, ranked: &[RankedEntry]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "## Region {region}\n");
    let _ = writeln!(s, "| # | Team | PI | RMSE |");
    let _ = writeln!(s, "|---|---|---|---|");
    for r in ranked {
        let star = if r.tied { "*" } else { "" };
        let _ = writeln!(
            s,
            "| {}{} | {} | {:.3} | {:.2} |",
            r.rank, star, r.submission.team, r.submission.pi, r.submission.rmse
        );
    }
    let negative: Vec<&str> = ranked
        .iter()
        .filter(|r| r.submission.has_negative_pi())
        .map(|r| r.submission.team.as_str())
        .collect();
    if !negative.is_empty() {
        let _ = writeln!(s, "\nWarning: negative PI for {}", negative.join(", "));
    }
    s
}

/// One submission as a point on the perception-distortion plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub rmse: f64,
    pub pi: f64,
    pub team: String,
    pub region: Option<u8>,
}

pub fn plane_export(entries: &[SubmissionSummary], spec: &RegionSpec) -> Vec<ScatterPoint> {
    entries
        .iter()
        .map(|e| ScatterPoint {
            rmse: e.rmse,
            pi: e.pi,
            team: e.team.clone(),
            region: assign_region(e.rmse, spec),
        })
        .collect()
}

pub fn write_scatter_csv<W: Write>(points: &[ScatterPoint], writer: W) -> Result<(), RankError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["rmse", "pi", "team", "region"])?;
    for p in points {
        let region = p.region.map(|r| r.to_string()).unwrap_or_default();
        w.write_record([p.rmse.to_string(), p.pi.to_string(), p.team.clone(), region])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_scatter_csv<R: Read>(reader: R) -> Result<Vec<ScatterPoint>, RankError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let num = |i: usize| {
            row[i]
                .parse::<f64>()
                .map_err(|e| RankError::Parse(format!("{}: {e}", &row[i])))
        };
        let region = match &row[3] {
            "" => None,
            s => Some(s.parse::<u8>().map_err(|e| RankError::Parse(e.to_string()))?),
        };
        out.push(ScatterPoint {
            rmse: num(0)?,
            pi: num(1)?,
            team: row[2].to_string(),
            region,
        });
    }
    Ok(out)
}
