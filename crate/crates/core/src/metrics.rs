//! Per-fire metrics.
//!
//! Every region-aware metric takes an optional evaluation mask; when given,
//! only pixels with `region = 1` contribute. Scores are widened from `f32` to
//! `f64` before any arithmetic.
//!
//! Conventions:
//! * predicted fire means `p >= threshold` (default 0.5);
//! * AP/AUPRC are step-wise sums `Σ (R_n - R_{n-1}) P_n` over descending
//!   unique thresholds, without interpolation, so a constant score yields the
//!   positive prevalence;
//! * AUROC is the trapezoidal area, i.e. ties earn half credit;
//! * boundaries use 4-connectivity and treat out-of-image as background.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{extract_boundary, squared_distance_transform};
use crate::raster::{BinaryMask, GeoConfig, Grid, ProbabilityMap, UncertaintyMap};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_NLL_EPSILON: f64 = 1e-7;

/// Confusion counts when predicting positive for `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankingCurvePoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Curve over the descending unique scores. The last point has every pixel
/// predicted positive.
pub fn ranking_curve(scores: &[f64], labels: &[bool]) -> Vec<RankingCurvePoint> {
    debug_assert_eq!(scores.len(), labels.len());
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut curve = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push(RankingCurvePoint {
            threshold,
            tp,
            fp,
            tn: negatives - fp,
            fn_: positives - tp,
        });
    }
    curve
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateClasses {
            positives,
            negatives,
        });
    }
    Ok((positives, negatives))
}

/// Step-wise average precision of `scores` against `labels`.
pub fn average_precision_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (positives, _) = class_counts(labels)?;
    let p = positives as f64;
    let mut ap = 0.0;
    let mut prev_tp = 0;
    for pt in ranking_curve(scores, labels) {
        if pt.tp > prev_tp {
            let precision = pt.tp as f64 / (pt.tp + pt.fp) as f64;
            ap += (pt.tp - prev_tp) as f64 / p * precision;
            prev_tp = pt.tp;
        }
    }
    Ok(ap)
}

/// Area under the ROC curve with trapezoidal handling of tied blocks.
pub fn roc_auc_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (positives, negatives) = class_counts(labels)?;
    // twice the area in units of (1/P)(1/N); integer arithmetic keeps it exact
    let mut twice_area: u128 = 0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    for pt in ranking_curve(scores, labels) {
        twice_area += ((pt.fp - prev_fp) * (pt.tp + prev_tp)) as u128;
        prev_tp = pt.tp;
        prev_fp = pt.fp;
    }
    Ok(twice_area as f64 / (2.0 * positives as f64 * negatives as f64))
}

fn check_region<T>(base: &Grid<T>, region: Option<&BinaryMask>) -> Result<()> {
    if let Some(r) = region {
        base.ensure_same_shape(r.grid())?;
    }
    Ok(())
}

fn in_region(region: Option<&BinaryMask>, i: usize) -> bool {
    region.is_none_or(|r| r.is_set(i))
}

/// Scores and labels of pixels inside `region`.
fn gather(scores: &Grid<f32>, labels: &BinaryMask, region: Option<&BinaryMask>) -> Result<(Vec<f64>, Vec<bool>)> {
    scores.ensure_same_shape(labels.grid())?;
    check_region(scores, region)?;
    let mut s = Vec::new();
    let mut l = Vec::new();
    for (i, &v) in scores.values().iter().enumerate() {
        if in_region(region, i) {
            s.push(f64::from(v));
            l.push(labels.is_set(i));
        }
    }
    if s.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok((s, l))
}

/// `(precision, recall)`; either is `None` when its denominator is zero.
pub fn precision_recall(
    pred: &BinaryMask,
    gt: &BinaryMask,
    region: Option<&BinaryMask>,
) -> Result<(Option<f64>, Option<f64>)> {
    pred.ensure_same_shape(gt.grid())?;
    check_region(pred, region)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for i in 0..pred.len() {
        if !in_region(region, i) {
            continue;
        }
        match (pred.is_set(i), gt.is_set(i)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok((ratio(tp, tp + fp), ratio(tp, tp + fn_)))
}

/// Average precision of fire probabilities against the ground truth.
pub fn average_precision(prob: &ProbabilityMap, gt: &BinaryMask, region: Option<&BinaryMask>) -> Result<f64> {
    let (s, l) = gather(prob.grid(), gt, region)?;
    average_precision_scores(&s, &l)
}

/// Mean distance (pixels) from each pixel of `from` to the nearest pixel of
/// `to`. Both masks must be nonempty.
fn mean_directed_distance(from: &BinaryMask, to: &BinaryMask) -> Result<f64> {
    let sq = squared_distance_transform(to)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in from.indices() {
        sum += (sq.values()[i] as f64).sqrt();
        n += 1;
    }
    Ok(sum / n as f64)
}

/// Symmetric average surface distance between two masks, in meters.
pub fn average_surface_distance(pred: &BinaryMask, gt: &BinaryMask, geo: &GeoConfig) -> Result<f64> {
    pred.ensure_same_shape(gt.grid())?;
    geo.validate()?;
    if pred.is_empty_mask() {
        return Err(Error::UndefinedAsd("predicted"));
    }
    if gt.is_empty_mask() {
        return Err(Error::UndefinedAsd("ground-truth"));
    }
    let pred_edge = extract_boundary(pred);
    let gt_edge = extract_boundary(gt);
    let forward = mean_directed_distance(&pred_edge, &gt_edge)?;
    let backward = mean_directed_distance(&gt_edge, &pred_edge)?;
    Ok(0.5 * (forward + backward) * geo.meters_per_pixel)
}

/// Mean squared error of probabilities against binary labels.
pub fn brier(prob: &ProbabilityMap, gt: &BinaryMask, region: Option<&BinaryMask>) -> Result<f64> {
    let (s, l) = gather(prob.grid(), gt, region)?;
    let sum: f64 = s
        .iter()
        .zip(&l)
        .map(|(&p, &y)| {
            let d = p - f64::from(u8::from(y));
            d * d
        })
        .sum();
    Ok(sum / s.len() as f64)
}

/// Mean Bernoulli log-loss with probabilities clipped to `[eps, 1 - eps]`.
pub fn nll(prob: &ProbabilityMap, gt: &BinaryMask, region: Option<&BinaryMask>, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 0.5), got {epsilon}"
        )));
    }
    let (s, l) = gather(prob.grid(), gt, region)?;
    let sum: f64 = s
        .iter()
        .zip(&l)
        .map(|(&p, &y)| {
            let p = p.clamp(epsilon, 1.0 - epsilon);
            if y {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum();
    Ok(-sum / s.len() as f64)
}

/// Misclassification map of a reference prediction: `e = [p >= t] != y`.
pub fn error_map(reference: &ProbabilityMap, gt: &BinaryMask, threshold: f64) -> Result<BinaryMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    reference.ensure_same_shape(gt.grid())?;
    let (h, w) = gt.shape();
    BinaryMask::from_bools(
        h,
        w,
        reference
            .values()
            .iter()
            .zip(gt.values())
            .map(|(&p, &y)| (f64::from(p) >= threshold) != (y != 0)),
    )
}

/// How well uncertainty ranks error pixels above correct ones (AUROC).
pub fn uq_auroc(unc: &UncertaintyMap, errors: &BinaryMask, region: Option<&BinaryMask>) -> Result<f64> {
    let (s, l) = gather(unc.grid(), errors, region)?;
    roc_auc_scores(&s, &l)
}

/// Step-wise AUPRC of uncertainty against errors, plus the error prevalence
/// (the AUPRC of a random ranking).
pub fn uq_auprc(unc: &UncertaintyMap, errors: &BinaryMask, region: Option<&BinaryMask>) -> Result<(f64, f64)> {
    let (s, l) = gather(unc.grid(), errors, region)?;
    let auprc = average_precision_scores(&s, &l)?;
    let prevalence = l.iter().filter(|&&e| e).count() as f64 / l.len() as f64;
    Ok((auprc, prevalence))
}

/// Metrics of one fire at one radius. `None` marks an undefined value
/// (single-class region, empty prediction); such entries are excluded from
/// aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub fire_id: String,
    pub year: i32,
    /// `None` for an unmasked evaluation.
    pub radius_px: Option<u32>,
    pub ap: Option<f64>,
    pub asd_m: Option<f64>,
    pub brier: Option<f64>,
    pub nll: Option<f64>,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub error_prevalence: Option<f64>,
    pub n_eval_px: usize,
}

/// Metric columns of a [`MetricRecord`], in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Ap,
    AsdM,
    Brier,
    Nll,
    Auroc,
    Auprc,
    ErrorPrevalence,
}

impl MetricName {
    pub const ALL: [MetricName; 7] = [
        MetricName::Ap,
        MetricName::AsdM,
        MetricName::Brier,
        MetricName::Nll,
        MetricName::Auroc,
        MetricName::Auprc,
        MetricName::ErrorPrevalence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Ap => "ap",
            MetricName::AsdM => "asd_m",
            MetricName::Brier => "brier",
            MetricName::Nll => "nll",
            MetricName::Auroc => "auroc",
            MetricName::Auprc => "auprc",
            MetricName::ErrorPrevalence => "error_prevalence",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        MetricName::ALL.into_iter().find(|m| m.as_str() == name)
    }
}

impl MetricRecord {
    pub fn get(&self, metric: MetricName) -> Option<f64> {
        match metric {
            MetricName::Ap => self.ap,
            MetricName::AsdM => self.asd_m,
            MetricName::Brier => self.brier,
            MetricName::Nll => self.nll,
            MetricName::Auroc => self.auroc,
            MetricName::Auprc => self.auprc,
            MetricName::ErrorPrevalence => self.error_prevalence,
        }
    }
}

/// Maps data-degenerate failures to `None` and propagates everything else.
pub fn missing_if_degenerate(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_degenerate() => Ok(None),
        Err(e) => Err(e),
    }
}
