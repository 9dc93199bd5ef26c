//! Perceptual index and externally computed score files.
//!
//! Score files are UTF-8 CSV with the header `image_id,value`, one row per
//! image. Lines starting with `#` are comments.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Scalar;

pub const MA: &str = "ma";
pub const NIQE: &str = "niqe";

/// Tolerance for the per-image-mean vs mean-of-metrics agreement.
pub const LINEARITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}: expected header `image_id,value`, found `{found}`")]
    BadHeader { source_name: String, found: String },
    #[error("{source_name} line {line}: {reason}")]
    BadRow {
        source_name: String,
        line: u64,
        reason: String,
    },
    #[error("{source_name} line {line}: duplicate image_id `{image_id}`")]
    Duplicate {
        source_name: String,
        line: u64,
        image_id: String,
    },
    #[error("{source_name}: no score for roster image(s) {missing:?}")]
    MissingRoster {
        source_name: String,
        missing: Vec<String>,
    },
    #[error("duplicate record ({method}, {image_id}, {metric})")]
    DuplicateRecord {
        method: String,
        image_id: String,
        metric: String,
    },
    #[error("method `{method}` lacks {metric} scores for {missing:?}")]
    Incomplete {
        method: String,
        metric: String,
        missing: Vec<String>,
    },
    #[error("method `{0}` has no images")]
    EmptyRoster(String),
    #[error("perceptual index aggregates disagree: {per_image} vs {from_means}")]
    LinearityViolation { per_image: f64, from_means: f64 },
}

/// `½ · ((10 − Ma) + NIQE)`. Lower is better.
pub fn perceptual_index<T: Scalar>(ma: T, niqe: T) -> T {
    T::lit(0.5) * ((T::lit(10.0) - ma) + niqe)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub method: String,
    pub image_id: String,
    pub metric: String,
    pub value: f64,
}

/// Score records keyed by `(method, image_id, metric)`.
#[derive(Clone, Debug, Default)]
pub struct ScoreSet {
    records: BTreeMap<(String, String, String), f64>,
    roster: Vec<String>,
}

impl ScoreSet {
    pub fn new(roster: Vec<String>) -> Self {
        Self {
            records: BTreeMap::new(),
            roster,
        }
    }

    pub fn roster(&self) -> &[String] {
        &self.roster
    }

    pub fn insert(&mut self, r: MetricRecord) -> Result<(), ScoreError> {
        let key = (r.method, r.image_id, r.metric);
        if self.records.contains_key(&key) {
            return Err(ScoreError::DuplicateRecord {
                method: key.0,
                image_id: key.1,
                metric: key.2,
            });
        }
        self.records.insert(key, r.value);
        Ok(())
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = MetricRecord>) -> Result<(), ScoreError> {
        records.into_iter().try_for_each(|r| self.insert(r))
    }

    pub fn get(&self, method: &str, image_id: &str, metric: &str) -> Option<f64> {
        self.records
            .get(&(method.to_string(), image_id.to_string(), metric.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn methods(&self) -> BTreeSet<&str> {
        self.records.keys().map(|(m, _, _)| m.as_str()).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = MetricRecord> + '_ {
        self.records.iter().map(|((method, image_id, metric), &value)| MetricRecord {
            method: method.clone(),
            image_id: image_id.clone(),
            metric: metric.clone(),
            value,
        })
    }

    /// Values of one metric for one method over the roster, in roster order.
    pub fn roster_values(&self, method: &str, metric: &str) -> Result<Vec<f64>, ScoreError> {
        if self.roster.is_empty() {
            return Err(ScoreError::EmptyRoster(method.to_string()));
        }
        let mut values = Vec::with_capacity(self.roster.len());
        let mut missing = Vec::new();
        for img in &self.roster {
            match self.get(method, img, metric) {
                Some(v) => values.push(v),
                None => missing.push(img.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(ScoreError::Incomplete {
                method: method.to_string(),
                metric: metric.to_string(),
                missing,
            });
        }
        Ok(values)
    }
}

/// Parses an `image_id,value` score table. `roster`, when given, must be fully covered.
pub fn parse_scores<R: Read>(
    reader: R,
    source_name: &str,
    method: &str,
    metric: &str,
    roster: Option<&[String]>,
) -> Result<Vec<MetricRecord>, ScoreError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let bad_row = |line: u64, reason: String| ScoreError::BadRow {
        source_name: source_name.to_string(),
        line,
        reason,
    };
    let header = rdr
        .headers()
        .map_err(|e| bad_row(1, e.to_string()))?
        .clone();
    if header.len() != 2 || &header[0] != "image_id" || &header[1] != "value" {
        return Err(ScoreError::BadHeader {
            source_name: source_name.to_string(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            bad_row(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let image_id = row[0].to_string();
        if image_id.is_empty() {
            return Err(bad_row(line, "empty image_id".into()));
        }
        let value: f64 = row[1]
            .parse()
            .map_err(|_| bad_row(line, format!("unparsable value `{}`", &row[1])))?;
        if !value.is_finite() {
            return Err(bad_row(line, format!("non-finite value `{}`", &row[1])));
        }
        if !seen.insert(image_id.clone()) {
            return Err(ScoreError::Duplicate {
                source_name: source_name.to_string(),
                line,
                image_id,
            });
        }
        out.push(MetricRecord {
            method: method.to_string(),
            image_id,
            metric: metric.to_string(),
            value,
        });
    }
    if let Some(roster) = roster {
        let missing: Vec<String> = roster.iter().filter(|r| !seen.contains(*r)).cloned().collect();
        if !missing.is_empty() {
            return Err(ScoreError::MissingRoster {
                source_name: source_name.to_string(),
                missing,
            });
        }
    }
    Ok(out)
}

pub fn load_scores(
    path: &Path,
    method: &str,
    metric: &str,
    roster: Option<&[String]>,
) -> Result<Vec<MetricRecord>, ScoreError> {
    let file = std::fs::File::open(path).map_err(|source| ScoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scores(file, &path.display().to_string(), method, metric, roster)
}

/// Writes records as an `image_id,value` table, in the given order.
pub fn write_scores<W: Write>(records: &[MetricRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["image_id", "value"])?;
    for r in records {
        w.write_record([r.image_id.as_str(), &r.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean perceptual index of a method over the roster.
///
/// Computed both as the mean of per-image indices and from the mean Ma and
/// mean NIQE; the two must agree to [`LINEARITY_TOLERANCE`].
pub fn dataset_pi(set: &ScoreSet, method: &str) -> Result<f64, ScoreError> {
    let ma = set.roster_values(method, MA)?;
    let niqe = set.roster_values(method, NIQE)?;
    let n = ma.len() as f64;
    let per_image = ma
        .iter()
        .zip(&niqe)
        .map(|(&m, &q)| perceptual_index(m, q))
        .sum::<f64>()
        / n;
    let from_means = perceptual_index(ma.iter().sum::<f64>() / n, niqe.iter().sum::<f64>() / n);
    if (per_image - from_means).abs() > LINEARITY_TOLERANCE * per_image.abs().max(1.0) {
        return Err(ScoreError::LinearityViolation {
            per_image,
            from_means,
        });
    }
    Ok(per_image)
}
