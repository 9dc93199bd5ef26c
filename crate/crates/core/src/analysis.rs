//! Agreement between quality measures and human opinion scores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::study::{CenteredScores, RatingAggregate};

pub const DEFAULT_ZOOM_THRESHOLD: f64 = 2.3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("length mismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("ranks have zero variance")]
    ZeroVariance,
    #[error("x is constant")]
    ConstantX,
    #[error("non-finite value")]
    NonFinite,
    #[error("missing values for: {}", .0.join(", "))]
    MissingJoin(Vec<String>),
}

fn check(x: &[f64], y: &[f64], min: usize) -> Result<(), AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < min {
        return Err(AnalysisError::TooFew {
            needed: min,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    Ok(())
}

/// 1-based ranks; tied values share the average of the positions they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    check(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    check(x, y, 3)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linfit(x: &[f64], y: &[f64]) -> Result<(f64, f64), AnalysisError> {
    check(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return Err(AnalysisError::ConstantX);
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPoint {
    pub method: String,
    /// Present for image-level points.
    pub image_id: Option<String>,
    pub mos: f64,
    pub metric_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub metric_name: String,
    pub rho: f64,
    pub n: usize,
    pub fit_slope: f64,
    pub fit_intercept: f64,
}

/// Spearman correlation of metric against MOS, and the fit of MOS on the metric.
pub fn correlate(metric_name: &str, points: &[AnalysisPoint]) -> Result<CorrelationResult, AnalysisError> {
    let x: Vec<f64> = points.iter().map(|p| p.metric_value).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mos).collect();
    let rho = spearman(&x, &y)?;
    let (fit_slope, fit_intercept) = linfit(&x, &y)?;
    Ok(CorrelationResult {
        metric_name: metric_name.to_string(),
        rho,
        n: points.len(),
        fit_slope,
        fit_intercept,
    })
}

/// Keeps points with MOS strictly above `threshold` and reanalyses them.
pub fn regime_zoom(
    metric_name: &str,
    points: &[AnalysisPoint],
    threshold: f64,
) -> Result<(Vec<AnalysisPoint>, CorrelationResult), AnalysisError> {
    let kept: Vec<AnalysisPoint> = points.iter().filter(|p| p.mos > threshold).cloned().collect();
    if kept.len() < 3 {
        return Err(AnalysisError::TooFew {
            needed: 3,
            got: kept.len(),
        });
    }
    let result = correlate(metric_name, &kept)?;
    Ok((kept, result))
}

/// Joins per-method MOS with per-method mean metric values. Every method on
/// either side must appear on both.
pub fn method_level_table(
    mos: &[RatingAggregate],
    metric: &BTreeMap<String, f64>,
) -> Result<Vec<AnalysisPoint>, AnalysisError> {
    let rated: BTreeSet<&str> = mos.iter().map(|a| a.method.as_str()).collect();
    let mut missing: Vec<String> = mos
        .iter()
        .filter(|a| !metric.contains_key(&a.method))
        .map(|a| format!("{} (metric)", a.method))
        .collect();
    missing.extend(
        metric
            .keys()
            .filter(|m| !rated.contains(m.as_str()))
            .map(|m| format!("{m} (MOS)")),
    );
    if !missing.is_empty() {
        return Err(AnalysisError::MissingJoin(missing));
    }
    Ok(mos
        .iter()
        .map(|a| AnalysisPoint {
            method: a.method.clone(),
            image_id: None,
            mos: a.mos,
            metric_value: metric[&a.method],
        })
        .collect())
}

/// Joins per-output centered MOS with per-output metric values, centering the
/// metric values per image over the joined methods.
pub fn image_level_table(
    centered: &CenteredScores,
    metric: &BTreeMap<(String, String), f64>,
) -> Result<Vec<AnalysisPoint>, AnalysisError> {
    let missing: Vec<String> = centered
        .scores
        .iter()
        .filter(|c| !metric.contains_key(&(c.method.clone(), c.image_id.clone())))
        .map(|c| format!("{}/{}", c.method, c.image_id))
        .collect();
    if !missing.is_empty() {
        return Err(AnalysisError::MissingJoin(missing));
    }
    let mut per_image: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for c in &centered.scores {
        per_image
            .entry(&c.image_id)
            .or_default()
            .push(metric[&(c.method.clone(), c.image_id.clone())]);
    }
    let image_mean: BTreeMap<&str, f64> = per_image.iter().map(|(k, v)| (*k, mean(v))).collect();
    Ok(centered
        .scores
        .iter()
        .map(|c| AnalysisPoint {
            method: c.method.clone(),
            image_id: Some(c.image_id.clone()),
            mos: c.centered,
            metric_value: metric[&(c.method.clone(), c.image_id.clone())] - image_mean[c.image_id.as_str()],
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rho: f64,
    pub n: usize,
    pub fit_slope: f64,
    pub fit_intercept: f64,
    pub zoomed: Option<CorrelationResult>,
    /// Why the zoomed analysis is absent, when it is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zoom_error: Option<String>,
}

/// Full analysis of one metric: correlation plus the high-MOS zoom.
pub fn analyze_metric(metric_name: &str, points: &[AnalysisPoint], threshold: f64) -> Result<MetricReport, AnalysisError> {
    let all = correlate(metric_name, points)?;
    let (zoomed, zoom_error) = match regime_zoom(metric_name, points, threshold) {
        Ok((_, r)) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(MetricReport {
        rho: all.rho,
        n: all.n,
        fit_slope: all.fit_slope,
        fit_intercept: all.fit_intercept,
        zoomed,
        zoom_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_trivial_cases() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert_eq!(spearman(&x, &x).unwrap(), 1.0);
        assert_eq!(spearman(&x, &rev).unwrap(), -1.0);
        assert!(matches!(spearman(&x, &x[..4]), Err(AnalysisError::LengthMismatch { .. })));
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &x[..3]), Err(AnalysisError::ZeroVariance));
        assert!(matches!(spearman(&x[..2], &x[..2]), Err(AnalysisError::TooFew { .. })));
    }

    #[test]
    fn tied_ranks_are_averaged() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 3.0, 3.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn linfit_cases() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_eq!(linfit(&x, &y).unwrap(), (2.0, 1.0));
        assert_eq!(linfit(&x, &[7.0; 4]).unwrap(), (0.0, 7.0));
        assert_eq!(linfit(&[1.0, 1.0], &[0.0, 1.0]), Err(AnalysisError::ConstantX));
    }

    fn pt(method: &str, mos: f64, v: f64) -> AnalysisPoint {
        AnalysisPoint {
            method: method.into(),
            image_id: None,
            mos,
            metric_value: v,
        }
    }

    #[test]
    fn zoom_cases() {
        let pts = vec![pt("a", 2.5, 1.0), pt("b", 2.6, 3.0), pt("c", 2.9, 2.0)];
        let (kept, r) = regime_zoom("m", &pts, DEFAULT_ZOOM_THRESHOLD).unwrap();
        assert_eq!(kept, pts);
        assert_eq!(r, correlate("m", &pts).unwrap());
        assert!(regime_zoom("m", &pts, 3.0).is_err());
        let (kept, _) = regime_zoom("m", &pts, f64::NEG_INFINITY).unwrap();
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn method_join_names_missing() {
        let agg = |m: &str| RatingAggregate {
            method: m.into(),
            mos: 2.0,
            histogram: [0.0, 1.0, 0.0, 0.0],
            n_votes: 1,
        };
        let metric: BTreeMap<String, f64> = [("a".to_string(), 1.0)].into();
        assert_eq!(method_level_table(&[agg("a")], &metric).unwrap().len(), 1);
        let err = method_level_table(&[agg("a"), agg("b")], &metric).unwrap_err();
        assert_eq!(err, AnalysisError::MissingJoin(vec!["b (metric)".into()]));
    }
}
