//! Paired one-sided Wilcoxon signed-rank test with rank-biserial effect size.
//!
//! Zero differences are discarded before ranking. Tied absolute differences
//! share their average rank. For up to [`EXACT_MAX_N`] nonzero pairs the
//! p-value is exact: the null distribution of `W+` is built by dynamic
//! programming over (doubled, hence integral) rank sums. Beyond that a normal
//! approximation with tie-corrected variance and continuity correction is
//! used.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const EXACT_MAX_N: usize = 25;

/// Per-fire pair of scores; `value_a` is the model hypothesised to be better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub fire_id: String,
    pub value_a: f64,
    pub value_b: f64,
}

impl PairedSample {
    pub fn diff(&self) -> f64 {
        self.value_a - self.value_b
    }
}

/// Builds pairs, dropping any with a missing side. Returns the pairs and the
/// number dropped.
pub fn pair_values<'a>(
    rows: impl IntoIterator<Item = (&'a str, Option<f64>, Option<f64>)>,
) -> (Vec<PairedSample>, usize) {
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for (id, a, b) in rows {
        match (a, b) {
            (Some(value_a), Some(value_b)) => pairs.push(PairedSample {
                fire_id: id.to_string(),
                value_a,
                value_b,
            }),
            _ => dropped += 1,
        }
    }
    (pairs, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// a > b
    Greater,
    /// a < b
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_pairs: usize,
    /// Zero differences removed before ranking.
    pub n_discarded: usize,
    pub n_effective: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub mode: TestMode,
}

/// Average ranks (1-based) of `values`, returned doubled so they are integers.
fn doubled_average_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1; twice their mean is i+j+2
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

fn tie_groups(abs: &[f64]) -> Vec<usize> {
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    groups
}

/// `P(W+ >= observed)` under the null, where each rank independently carries
/// a positive sign with probability 1/2.
fn exact_upper_tail(doubled_ranks: &[u64], observed_doubled: u64) -> f64 {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let tail: f64 = counts[observed_doubled as usize..].iter().sum();
    tail / 2f64.powi(doubled_ranks.len() as i32)
}

fn normal_upper_tail(n: usize, w_plus: f64, ties: &[usize]) -> f64 {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    let z = (w_plus - mean - 0.5) / var.sqrt();
    Normal::standard().sf(z)
}

/// One-sided signed-rank test on raw differences `a - b`.
///
/// `mode = None` chooses exact enumeration up to [`EXACT_MAX_N`] nonzero
/// differences and the normal approximation above.
pub fn wilcoxon_diffs(diffs: &[f64], alternative: Alternative, mode: Option<TestMode>) -> Result<WilcoxonResult> {
    if let Some(d) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite paired difference {d}")));
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::DegenerateTest);
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = doubled_average_ranks(&abs);
    let plus_doubled: u64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total_doubled: u64 = ranks.iter().sum();
    let w_plus = plus_doubled as f64 / 2.0;
    let w_minus = (total_doubled - plus_doubled) as f64 / 2.0;

    // the "less" alternative is the "greater" test on the negated differences
    let (tail_doubled, tail_w) = match alternative {
        Alternative::Greater => (plus_doubled, w_plus),
        Alternative::Less => (total_doubled - plus_doubled, w_minus),
    };
    let mode = mode.unwrap_or(if n <= EXACT_MAX_N {
        TestMode::Exact
    } else {
        TestMode::Normal
    });
    let p_value = match mode {
        TestMode::Exact => exact_upper_tail(&ranks, tail_doubled),
        TestMode::Normal => normal_upper_tail(n, tail_w, &tie_groups(&abs)),
    };

    Ok(WilcoxonResult {
        n_pairs: diffs.len(),
        n_discarded: diffs.len() - n,
        n_effective: n,
        w_plus,
        w_minus,
        p_value: p_value.min(1.0),
        mode,
    })
}

/// One-sided paired test that `value_a` tends to exceed `value_b` (or the
/// reverse, per `alternative`).
pub fn wilcoxon_one_sided(pairs: &[PairedSample], alternative: Alternative) -> Result<WilcoxonResult> {
    let diffs: Vec<f64> = pairs.iter().map(PairedSample::diff).collect();
    wilcoxon_diffs(&diffs, alternative, None)
}

/// `(W+ - W-) / (W+ + W-)`.
pub fn rank_biserial(w_plus: f64, w_minus: f64) -> Result<f64> {
    let total = w_plus + w_minus;
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateTest);
    }
    Ok((w_plus - w_minus) / total)
}

/// Report block for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub metric: String,
    pub alternative: Alternative,
    pub n_pairs: usize,
    /// Pairs dropped because one side was missing.
    pub n_missing: usize,
    pub n_discarded: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub rank_biserial: f64,
    pub mode: TestMode,
}

impl StatsReport {
    pub fn compute(
        metric: &str,
        pairs: &[PairedSample],
        n_missing: usize,
        alternative: Alternative,
    ) -> Result<Self> {
        let w = wilcoxon_one_sided(pairs, alternative)?;
        Ok(StatsReport {
            metric: metric.to_string(),
            alternative,
            n_pairs: w.n_pairs,
            n_missing,
            n_discarded: w.n_discarded,
            w_plus: w.w_plus,
            w_minus: w.w_minus,
            p_value: w.p_value,
            rank_biserial: rank_biserial(w.w_plus, w.w_minus)?,
            mode: w.mode,
        })
    }
}
