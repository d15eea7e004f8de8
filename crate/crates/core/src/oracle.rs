//! Brute-force reference implementations.
//!
//! Nothing here calls into the fast paths: curves come from explicit
//! threshold enumeration, AUROC from pair counting, distances from all-pairs
//! scans and Wilcoxon tail probabilities from full sign-flip enumeration.
//! Each oracle refuses inputs above its size limit.

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// Largest pixel count for ranking oracles (32 x 32).
pub const MAX_RANKING_PIXELS: usize = 1024;
/// Largest pixel count for distance-transform and dilation oracles.
pub const MAX_RASTER_PIXELS: usize = 1024;
/// Largest boundary set for the ASD oracle.
pub const MAX_BOUNDARY_POINTS: usize = 1000;
/// Largest sample for sign-flip enumeration.
pub const MAX_WILCOXON_N: usize = 12;

fn too_large(what: &str, n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::InstanceTooLarge(format!("{what}: {n} exceeds oracle limit {limit}")));
    }
    Ok(())
}

fn check_ranking(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![scores.len()],
            found: vec![labels.len()],
        });
    }
    too_large("ranking instance", scores.len(), MAX_RANKING_PIXELS)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateClasses {
            positives: pos,
            negatives: neg,
        });
    }
    Ok((pos, neg))
}

/// Step-wise AP: for every distinct score `t` in descending order, count
/// the confusion matrix of `score >= t` from scratch.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_ranking(scores, labels)?;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let mut tp = 0usize;
        let mut predicted = 0usize;
        for (s, l) in scores.iter().zip(labels) {
            if *s >= t {
                predicted += 1;
                if *l {
                    tp += 1;
                }
            }
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / predicted as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting 1/2.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_ranking(scores, labels)?;
    let mut half_wins = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            if scores[i] > scores[j] {
                half_wins += 2;
            } else if scores[i] == scores[j] {
                half_wins += 1;
            }
        }
    }
    Ok(half_wins as f64 / (2 * pos * neg) as f64)
}

/// AUPRC of uncertainty against an error indicator; same as AP.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    average_precision(scores, labels)
}

fn coords(mask: &BinaryMask) -> Vec<(i64, i64)> {
    let w = mask.width();
    let mut out = Vec::new();
    for (i, &v) in mask.values().iter().enumerate() {
        if v == 1 {
            out.push(((i / w) as i64, (i % w) as i64));
        }
    }
    out
}

/// Squared distance from every pixel to the nearest foreground pixel by
/// scanning all foreground pixels.
pub fn squared_edt(mask: &BinaryMask) -> Result<Vec<u64>> {
    too_large("raster", mask.len(), MAX_RASTER_PIXELS)?;
    let fg = coords(mask);
    if fg.is_empty() {
        return Err(Error::EmptyForeground);
    }
    let (h, w) = (mask.height() as i64, mask.width() as i64);
    let mut out = Vec::with_capacity(mask.len());
    for r in 0..h {
        for c in 0..w {
            let mut best = u64::MAX;
            for &(y, x) in &fg {
                let d = ((r - y) * (r - y) + (c - x) * (c - x)) as u64;
                best = best.min(d);
            }
            out.push(best);
        }
    }
    Ok(out)
}

/// Pixels within Euclidean distance `radius_px` of some foreground pixel.
pub fn dilate(mask: &BinaryMask, radius_px: f64) -> Result<BinaryMask> {
    too_large("raster", mask.len(), MAX_RASTER_PIXELS)?;
    if !(radius_px >= 0.0 && radius_px.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad radius {radius_px}")));
    }
    let fg = coords(mask);
    let (h, w) = (mask.height(), mask.width());
    let mut out = vec![0u8; h * w];
    for (i, o) in out.iter_mut().enumerate() {
        let (r, c) = ((i / w) as i64, (i % w) as i64);
        if fg
            .iter()
            .any(|&(y, x)| (((r - y).pow(2) + (c - x).pow(2)) as f64).sqrt() <= radius_px)
        {
            *o = 1;
        }
    }
    BinaryMask::from_vec(h, w, out)
}

/// Foreground pixels touching background or the image edge (4-neighbours).
pub fn boundary(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = (mask.height() as i64, mask.width() as i64);
    let set = |r: i64, c: i64| r >= 0 && c >= 0 && r < h && c < w && mask.values()[(r * w + c) as usize] == 1;
    let mut out = vec![0u8; mask.len()];
    for r in 0..h {
        for c in 0..w {
            if set(r, c) && [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)].iter().any(|&(y, x)| !set(y, x)) {
                out[(r * w + c) as usize] = 1;
            }
        }
    }
    BinaryMask::from_vec(h as usize, w as usize, out).expect("same shape")
}

/// Symmetric ASD in meters: mean of the two directed mean boundary
/// distances, each computed by scanning every boundary pair.
pub fn average_surface_distance(pred: &BinaryMask, gt: &BinaryMask, meters_per_pixel: f64) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            expected: vec![gt.height(), gt.width()],
            found: vec![pred.height(), pred.width()],
        });
    }
    let a = coords(&boundary(pred));
    let b = coords(&boundary(gt));
    if a.is_empty() {
        return Err(Error::UndefinedAsd("predicted"));
    }
    if b.is_empty() {
        return Err(Error::UndefinedAsd("ground-truth"));
    }
    too_large("boundary set", a.len().max(b.len()), MAX_BOUNDARY_POINTS)?;
    let directed = |from: &[(i64, i64)], to: &[(i64, i64)]| {
        let total: f64 = from
            .iter()
            .map(|&(y, x)| {
                to.iter()
                    .map(|&(v, u)| (((y - v).pow(2) + (x - u).pow(2)) as f64).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / from.len() as f64
    };
    Ok((directed(&a, &b) + directed(&b, &a)) / 2.0 * meters_per_pixel)
}

/// Sign-flip enumeration of the signed-rank statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonOracle {
    pub w_plus: f64,
    pub w_minus: f64,
    /// `P(W+ >= observed)`.
    pub p_greater: f64,
    /// `P(W- >= observed W-)`.
    pub p_less: f64,
}

/// Drops zero differences, assigns average ranks by counting and enumerates
/// all `2^n` sign patterns.
pub fn wilcoxon(diffs: &[f64]) -> Result<WilcoxonOracle> {
    let d: Vec<f64> = diffs.iter().copied().filter(|&v| v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::DegenerateTest);
    }
    too_large("wilcoxon sample", d.len(), MAX_WILCOXON_N)?;
    let n = d.len();
    let ranks: Vec<f64> = (0..n)
        .map(|i| {
            let a = d[i].abs();
            let below = d.iter().filter(|v| v.abs() < a).count();
            let equal = d.iter().filter(|v| v.abs() == a).count();
            below as f64 + (equal as f64 + 1.0) / 2.0
        })
        .collect();
    let w_plus: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let w_minus: f64 = (0..n).filter(|&i| d[i] < 0.0).map(|i| ranks[i]).sum();
    let total = w_plus + w_minus;
    let (mut ge_plus, mut ge_minus) = (0u64, 0u64);
    for pattern in 0u32..(1 << n) {
        let wp: f64 = (0..n).filter(|&i| pattern >> i & 1 == 1).map(|i| ranks[i]).sum();
        if wp >= w_plus {
            ge_plus += 1;
        }
        if total - wp >= w_minus {
            ge_minus += 1;
        }
    }
    let all = (1u64 << n) as f64;
    Ok(WilcoxonOracle {
        w_plus,
        w_minus,
        p_greater: ge_plus as f64 / all,
        p_less: ge_minus as f64 / all,
    })
}
