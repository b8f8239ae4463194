use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bundle::SystemKind;
use crate::csi::FeatureSet;
use crate::error::{check_len, Error, Result};
use crate::vsdl::Predictions;

pub fn localization_error(pred_m: [f64; 2], true_m: [f64; 2]) -> f64 {
    (pred_m[0] - true_m[0]).hypot(pred_m[1] - true_m[1])
}

/// Row-wise Euclidean distances between two `n × 2` arrays.
pub fn localization_errors(pred_m: &Array2<f64>, true_m: &Array2<f64>) -> Result<Vec<f64>> {
    if pred_m.shape() != true_m.shape() || pred_m.ncols() != 2 {
        return Err(Error::Shape {
            context: "prediction vs truth",
            expected: true_m.len(),
            actual: pred_m.len(),
        });
    }
    Ok(pred_m
        .rows()
        .into_iter()
        .zip(true_m.rows())
        .map(|(p, t)| localization_error([p[0], p[1]], [t[0], t[1]]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error_m: f64,
    pub fraction: f64,
}

/// Empirical CDF with one step per sample, in ascending error order.
pub fn error_cdf(errors: &[f64]) -> Result<Vec<CdfPoint>> {
    if errors.is_empty() {
        return Err(Error::Data("cannot build a CDF from zero errors".into()));
    }
    let sorted = sorted(errors)?;
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, e)| CdfPoint {
            error_m: e,
            fraction: (i + 1) as f64 / n,
        })
        .collect())
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("errors must be finite".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Linear interpolation between order statistics; `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile(&v, 0.5)
}

/// Per-test-point summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub point_id: u32,
    pub location_m: [f64; 2],
    pub view_label: Vec<u8>,
    pub packets: usize,
    pub mean_error_m: f64,
    /// Fraction of packets whose largest `û` entry is the single informative
    /// view. Absent for multi-view points and systems without a classifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominant_view_accuracy: Option<f64>,
    /// Per-view median of `û` over the point's packets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub median_u_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub system: SystemKind,
    pub seed: u64,
    /// SHA-256 of the canonical configuration text.
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub metadata: RunMetadata,
    pub samples: usize,
    pub mean_m: f64,
    pub median_m: f64,
    /// Keys `p50`, `p75`, `p90`, `p95`.
    pub percentiles_m: BTreeMap<String, f64>,
    pub points: Vec<PointReport>,
    pub errors_m: Vec<f64>,
    pub cdf: Vec<CdfPoint>,
}

pub const REPORTED_PERCENTILES: [u32; 4] = [50, 75, 90, 95];

impl ErrorReport {
    pub fn from_errors(metadata: RunMetadata, errors_m: Vec<f64>, points: Vec<PointReport>) -> Result<Self> {
        let cdf = error_cdf(&errors_m)?;
        let sorted: Vec<f64> = cdf.iter().map(|c| c.error_m).collect();
        let mean_m = errors_m.iter().sum::<f64>() / errors_m.len() as f64;
        let percentiles_m = REPORTED_PERCENTILES
            .iter()
            .map(|&p| (format!("p{p}"), percentile(&sorted, f64::from(p) / 100.0)))
            .collect();
        Ok(ErrorReport {
            metadata,
            samples: errors_m.len(),
            mean_m,
            median_m: percentile(&sorted, 0.5),
            percentiles_m,
            points,
            errors_m,
            cdf,
        })
    }

    /// Scores predictions against a labelled feature set.
    pub fn evaluate(metadata: RunMetadata, pred: &Predictions, truth: &FeatureSet, pred_m: &Array2<f64>) -> Result<Self> {
        check_len("predictions", truth.len(), pred.len())?;
        let errors = localization_errors(pred_m, &truth.raw_locations)?;
        let points = point_reports(&errors, pred, truth);
        Self::from_errors(metadata, errors, points)
    }
}

fn point_reports(errors: &[f64], pred: &Predictions, truth: &FeatureSet) -> Vec<PointReport> {
    let mut order: Vec<u32> = Vec::new();
    let mut rows: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &id) in truth.point_ids.iter().enumerate() {
        rows.entry(id).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        rows.get_mut(&id).expect("inserted").push(i);
    }
    let views = pred.u_hat.ncols();
    order
        .into_iter()
        .map(|id| {
            let idx = &rows[&id];
            let first = idx[0];
            let label = truth.labels[first].clone();
            let mean_error_m = idx.iter().map(|&i| errors[i]).sum::<f64>() / idx.len() as f64;
            let informative: Vec<usize> = label.iter().enumerate().filter(|(_, &u)| u == 1).map(|(k, _)| k).collect();
            let dominant_view_accuracy = (views > 0 && informative.len() == 1).then(|| {
                let hits = idx.iter().filter(|&&i| argmax(pred.u_hat.row(i).iter().copied()) == informative[0]).count();
                hits as f64 / idx.len() as f64
            });
            let median_u_hat = (0..views)
                .map(|k| median(&idx.iter().map(|&i| pred.u_hat[[i, k]]).collect::<Vec<_>>()))
                .collect();
            PointReport {
                point_id: id,
                location_m: [truth.raw_locations[[first, 0]], truth.raw_locations[[first, 1]]],
                view_label: label,
                packets: idx.len(),
                mean_error_m,
                dominant_view_accuracy,
                median_u_hat,
            }
        })
        .collect()
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(localization_error([1.0, 2.0], [1.0, 2.0]), 0.0);
        assert_eq!(localization_error([0.0, 0.0], [3.0, 4.0]), 5.0);
    }

    #[test]
    fn cdf_examples() {
        let c = error_cdf(&[0.7]).unwrap();
        assert_eq!(c, vec![CdfPoint { error_m: 0.7, fraction: 1.0 }]);
        let c = error_cdf(&[3.0, 1.0, 2.0]).unwrap();
        let fr: Vec<f64> = c.iter().map(|p| p.fraction).collect();
        assert_eq!(fr, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(c[0].error_m, 1.0);
        assert!(error_cdf(&[]).is_err());
        assert!(error_cdf(&[f64::NAN]).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert_eq!(percentile(&v, 0.5), 2.5);
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
    }
}
