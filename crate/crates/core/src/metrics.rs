//! Depth and normal error metrics.

use crate::image::{check_dims, DepthImage, NormalMap};
use crate::{Error, Result};

/// Ratio thresholds of the delta accuracy metric.
pub const DELTA_THRESHOLDS: [f64; 5] = [1.05, 1.10, 1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25];

/// Angle thresholds (degrees) of the normal accuracy metric.
pub const ANGLE_THRESHOLDS: [f64; 3] = [11.25, 22.5, 30.0];

/// Which pixels enter an evaluation, relative to the raw input mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalSet {
    Observed,
    Unobserved,
    All,
}

impl std::str::FromStr for EvalSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observed" => Ok(EvalSet::Observed),
            "unobserved" => Ok(EvalSet::Unobserved),
            "all" => Ok(EvalSet::All),
            _ => Err(Error::format("pixel set", format!("unknown set {s:?}"))),
        }
    }
}

/// How a pixel counts as accurate under a threshold `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DeltaMode {
    /// `max(pred / truth, truth / pred) < t`.
    #[default]
    MaxRatio,
    /// `|pred - truth| / truth < t`, read literally.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    /// Median of `|pred - truth| / truth`.
    pub rel: f64,
    /// Root mean squared error, metres.
    pub rmse: f64,
    /// Percentages for [`DELTA_THRESHOLDS`].
    pub delta: [f64; 5],
    pub n_eval: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalReport {
    pub mean_deg: f64,
    pub median_deg: f64,
    /// Percentages for [`ANGLE_THRESHOLDS`].
    pub pct: [f64; 3],
    pub n_eval: usize,
}

/// Median with the even-count convention of averaging the middle pair.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Pixels valid in `truth` and in the requested split of `raw_mask`.
pub fn eval_mask(truth: &DepthImage, raw_mask: Option<&[bool]>, set: EvalSet) -> Result<Vec<bool>> {
    if let Some(m) = raw_mask {
        if m.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: (truth.len(), 1),
                actual: (m.len(), 1),
            });
        }
    }
    let split = |i: usize| match (set, raw_mask) {
        (EvalSet::All, _) => Ok(true),
        (EvalSet::Observed, Some(m)) => Ok(m[i]),
        (EvalSet::Unobserved, Some(m)) => Ok(!m[i]),
        (_, None) => Err(Error::MissingMap("raw mask for an observed/unobserved split")),
    };
    (0..truth.len()).map(|i| Ok(truth.is_valid(i) && split(i)?)).collect()
}

/// Depth metrics of `pred` against `truth` over pixels valid in `truth`,
/// restricted to `set` of `raw_mask` (required unless `set` is `All`).
/// Pixels missing in `pred` count as errors of the full truth depth.
pub fn depth_metrics(pred: &DepthImage, truth: &DepthImage, raw_mask: Option<&[bool]>, set: EvalSet) -> Result<MetricsReport> {
    depth_metrics_with(pred, truth, raw_mask, set, DeltaMode::MaxRatio)
}

pub fn depth_metrics_with(
    pred: &DepthImage,
    truth: &DepthImage,
    raw_mask: Option<&[bool]>,
    set: EvalSet,
    mode: DeltaMode,
) -> Result<MetricsReport> {
    check_dims(truth.dims(), pred.dims())?;
    let mask = eval_mask(truth, raw_mask, set)?;
    let pairs: Vec<(f64, f64)> = (0..truth.len())
        .filter(|&i| mask[i])
        .map(|i| (pred.depth(i).unwrap_or(0.0), truth.data()[i]))
        .collect();
    metrics_from_pairs(&pairs, mode)
}

/// Metrics over explicit `(pred, truth)` pairs.
pub fn metrics_from_pairs(pairs: &[(f64, f64)], mode: DeltaMode) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let n = pairs.len() as f64;
    let mut rel: Vec<f64> = pairs.iter().map(|(p, t)| (p - t).abs() / t).collect();
    let mse = pairs.iter().map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let mut delta = [0.0; 5];
    for (slot, &threshold) in delta.iter_mut().zip(&DELTA_THRESHOLDS) {
        let hits = pairs
            .iter()
            .filter(|&&(p, t)| match mode {
                DeltaMode::MaxRatio => p > 0.0 && (p / t).max(t / p) < threshold,
                DeltaMode::Literal => (p - t).abs() / t < threshold,
            })
            .count();
        *slot = 100.0 * hits as f64 / n;
    }
    Ok(MetricsReport {
        rel: median(&mut rel),
        rmse: mse.sqrt(),
        delta,
        n_eval: pairs.len(),
    })
}

/// Angular error statistics over `mask`; pixels without a normal in either
/// map are skipped.
pub fn normal_metrics(pred: &NormalMap, truth: &NormalMap, mask: Option<&[bool]>) -> Result<NormalReport> {
    check_dims(truth.dims(), pred.dims())?;
    let n = truth.data().len();
    let mut angles: Vec<f64> = (0..n)
        .filter(|&i| mask.is_none_or(|m| m[i]))
        .filter_map(|i| {
            let (a, b) = (pred.normal(i)?, truth.normal(i)?);
            Some(a.dot(&b).clamp(-1.0, 1.0).acos().to_degrees())
        })
        .collect();
    if angles.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let count = angles.len() as f64;
    let mean_deg = angles.iter().sum::<f64>() / count;
    let mut pct = [0.0; 3];
    for (slot, &t) in pct.iter_mut().zip(&ANGLE_THRESHOLDS) {
        *slot = 100.0 * angles.iter().filter(|&&a| a < t).count() as f64 / count;
    }
    Ok(NormalReport {
        mean_deg,
        median_deg: median(&mut angles),
        pct,
        n_eval: angles.len(),
    })
}
