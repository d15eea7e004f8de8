//! Fire-centered evaluation regions.
//!
//! The evaluation region of a fire is its ground-truth mask dilated by a disk
//! of radius `r`. A sweep recomputes the masked calibration and ranking
//! metrics for a list of radii; the anchor radius is derived from the mean
//! average surface distance and is where models are compared head to head.
//!
//! AP and ASD are always computed on the whole crop. Brier, NLL, AUROC and
//! AUPRC are computed inside the region.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, missing_if_degenerate, MetricName, MetricRecord};
use crate::morphology::{squared_distance_transform, threshold_distance};
use crate::raster::{BinaryMask, FireEvent, GeoConfig, Grid, ProbabilityMap, UncertaintyMap};

/// How the anchor radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorPolicy {
    FixedPx(u32),
    /// `round(mean ASD / meters_per_pixel)`, at least 1 px, per year.
    MeanAsd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub radii_px: Vec<u32>,
    pub anchor: AnchorPolicy,
    pub error_threshold: f64,
    pub nll_epsilon: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            radii_px: (0..=16).collect(),
            anchor: AnchorPolicy::MeanAsd,
            error_threshold: metrics::DEFAULT_THRESHOLD,
            nll_epsilon: metrics::DEFAULT_NLL_EPSILON,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii_px.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("radii must be strictly increasing".into()));
        }
        if !(self.error_threshold > 0.0 && self.error_threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "error threshold must lie in (0, 1), got {}",
                self.error_threshold
            )));
        }
        if !(self.nll_epsilon > 0.0 && self.nll_epsilon < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.nll_epsilon
            )));
        }
        Ok(())
    }
}

/// Ground truth dilated by `radius_px`; radius 0 returns the mask itself.
pub fn build_fcer(gt: &BinaryMask, radius_px: u32) -> Result<BinaryMask> {
    if gt.is_empty_mask() {
        return Err(Error::EmptyGroundTruth);
    }
    threshold_distance(&squared_distance_transform(gt)?, f64::from(radius_px))
}

/// Anchor radius in pixels.
pub fn resolve_anchor(asd_values_m: &[f64], geo: &GeoConfig, policy: AnchorPolicy) -> Result<u32> {
    match policy {
        AnchorPolicy::FixedPx(k) => Ok(k),
        AnchorPolicy::MeanAsd => {
            geo.validate()?;
            if asd_values_m.is_empty() {
                return Err(Error::InvalidArgument(
                    "mean-ASD anchor needs at least one ASD value".into(),
                ));
            }
            let mean = asd_values_m.iter().sum::<f64>() / asd_values_m.len() as f64;
            let px = (mean / geo.meters_per_pixel).round();
            Ok(px.max(1.0) as u32)
        }
    }
}

/// Probability and uncertainty produced by one model for one fire.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub prob: ProbabilityMap,
    pub unc: UncertaintyMap,
}

/// Unmasked segmentation metrics and per-radius records of one fire.
#[derive(Debug, Clone, PartialEq)]
pub struct FireEvaluation {
    pub fire_id: String,
    pub year: i32,
    pub ap: Option<f64>,
    pub asd_m: Option<f64>,
    pub records: Vec<MetricRecord>,
}

/// Evaluates one fire at every radius in `radii`.
pub fn evaluate_fire(
    event: &FireEvent,
    output: &ModelOutput,
    reference: &ProbabilityMap,
    radii: &[u32],
    config: &SweepConfig,
    geo: &GeoConfig,
) -> Result<FireEvaluation> {
    let gt = &event.gt;
    gt.ensure_same_shape(output.prob.grid())?;
    gt.ensure_same_shape(output.unc.grid())?;
    gt.ensure_same_shape(reference.grid())?;
    if gt.is_empty_mask() {
        return Err(Error::EmptyGroundTruth);
    }

    let ap = missing_if_degenerate(metrics::average_precision(&output.prob, gt, None))?;
    let pred = output.prob.threshold(config.error_threshold);
    let asd_m = missing_if_degenerate(metrics::average_surface_distance(&pred, gt, geo))?;
    let errors = metrics::error_map(reference, gt, config.error_threshold)?;
    let distances = squared_distance_transform(gt)?;

    let records = radii
        .iter()
        .map(|&r| {
            let region = threshold_distance(&distances, f64::from(r))?;
            region_record(event, output, &errors, &region, Some(r), ap, asd_m, config)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FireEvaluation {
        fire_id: event.id.clone(),
        year: event.year,
        ap,
        asd_m,
        records,
    })
}

#[allow(clippy::too_many_arguments)]
fn region_record(
    event: &FireEvent,
    output: &ModelOutput,
    errors: &BinaryMask,
    region: &BinaryMask,
    radius_px: Option<u32>,
    ap: Option<f64>,
    asd_m: Option<f64>,
    config: &SweepConfig,
) -> Result<MetricRecord> {
    let gt = &event.gt;
    let region_opt = Some(region);
    let brier = metrics::brier(&output.prob, gt, region_opt)?;
    let nll = metrics::nll(&output.prob, gt, region_opt, config.nll_epsilon)?;
    let auroc = missing_if_degenerate(metrics::uq_auroc(&output.unc, errors, region_opt))?;
    let n_eval_px = region.count();
    let n_err = region.indices().filter(|&i| errors.is_set(i)).count();
    let auprc = match metrics::uq_auprc(&output.unc, errors, region_opt) {
        Ok((v, _)) => Some(v),
        Err(e) if e.is_degenerate() => None,
        Err(e) => return Err(e),
    };
    Ok(MetricRecord {
        fire_id: event.id.clone(),
        year: event.year,
        radius_px,
        ap,
        asd_m,
        brier: Some(brier),
        nll: Some(nll),
        auroc,
        auprc,
        error_prevalence: Some(n_err as f64 / n_eval_px as f64),
        n_eval_px,
    })
}

/// Unmasked counterpart of a sweep record (region = whole crop).
pub fn evaluate_unmasked(
    event: &FireEvent,
    output: &ModelOutput,
    reference: &ProbabilityMap,
    config: &SweepConfig,
    geo: &GeoConfig,
) -> Result<MetricRecord> {
    let (h, w) = event.shape();
    let fe = evaluate_fire(event, output, reference, &[], config, geo)?;
    let errors = metrics::error_map(reference, &event.gt, config.error_threshold)?;
    region_record(
        event,
        output,
        &errors,
        &BinaryMask::ones(h, w)?,
        None,
        fe.ap,
        fe.asd_m,
        config,
    )
}

/// Mean of the non-missing values of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub n: usize,
    pub n_missing: usize,
}

impl MetricSummary {
    pub fn from_values(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut sum = 0.0;
        let mut n = 0;
        let mut n_missing = 0;
        for v in values {
            match v {
                Some(v) => {
                    sum += v;
                    n += 1;
                }
                None => n_missing += 1,
            }
        }
        MetricSummary {
            mean: (n > 0).then(|| sum / n as f64),
            n,
            n_missing,
        }
    }
}

/// Unweighted per-radius mean over fires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusAggregate {
    pub radius_px: u32,
    pub n_records: usize,
    pub mean_eval_px: f64,
    pub metrics: BTreeMap<MetricName, MetricSummary>,
}

fn summarize(records: &[&MetricRecord]) -> BTreeMap<MetricName, MetricSummary> {
    MetricName::ALL
        .into_iter()
        .map(|m| (m, MetricSummary::from_values(records.iter().map(|r| r.get(m)))))
        .collect()
}

pub fn aggregate_by_radius(records: &[MetricRecord]) -> Vec<RadiusAggregate> {
    let mut by_radius: BTreeMap<u32, Vec<&MetricRecord>> = BTreeMap::new();
    for r in records {
        if let Some(radius) = r.radius_px {
            by_radius.entry(radius).or_default().push(r);
        }
    }
    by_radius
        .into_iter()
        .map(|(radius_px, recs)| RadiusAggregate {
            radius_px,
            n_records: recs.len(),
            mean_eval_px: recs.iter().map(|r| r.n_eval_px as f64).sum::<f64>() / recs.len() as f64,
            metrics: summarize(&recs),
        })
        .collect()
}

/// Result of sweeping one model over a set of fires.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Fire-major, radius ascending; includes anchor radii evaluated on
    /// demand.
    pub records: Vec<MetricRecord>,
    pub aggregates: Vec<RadiusAggregate>,
    /// Anchor radius per year.
    pub anchors: BTreeMap<i32, u32>,
    /// Fires skipped because their ground truth is empty.
    pub skipped: Vec<String>,
}

impl SweepResult {
    /// Records at each fire's year anchor, in fire order.
    pub fn anchor_records(&self) -> Vec<&MetricRecord> {
        self.records
            .iter()
            .filter(|r| r.radius_px.is_some() && self.anchors.get(&r.year).copied() == r.radius_px)
            .collect()
    }

    /// Records at one fixed radius, in fire order.
    pub fn records_at(&self, radius_px: u32) -> Vec<&MetricRecord> {
        self.records.iter().filter(|r| r.radius_px == Some(radius_px)).collect()
    }
}

fn check_inputs(events: &[FireEvent], outputs: &[&[ModelOutput]], references: &[ProbabilityMap]) -> Result<()> {
    for o in outputs {
        if o.len() != events.len() {
            return Err(Error::InvalidArgument(format!(
                "{} model outputs for {} fires",
                o.len(),
                events.len()
            )));
        }
    }
    if references.len() != events.len() {
        return Err(Error::InvalidArgument(format!(
            "{} reference maps for {} fires",
            references.len(),
            events.len()
        )));
    }
    events.iter().try_for_each(FireEvent::validate)
}

fn sweep_fires(
    events: &[FireEvent],
    outputs: &[ModelOutput],
    references: &[ProbabilityMap],
    config: &SweepConfig,
    geo: &GeoConfig,
) -> Result<(Vec<FireEvaluation>, Vec<String>)> {
    let evaluated: Vec<Option<FireEvaluation>> = events
        .par_iter()
        .zip(outputs.par_iter())
        .zip(references.par_iter())
        .map(|((e, o), r)| match evaluate_fire(e, o, r, &config.radii_px, config, geo) {
            Ok(fe) => Ok(Some(fe)),
            Err(Error::EmptyGroundTruth) => Ok(None),
            Err(err) => Err(err),
        })
        .collect::<Result<_>>()?;
    let skipped = events
        .iter()
        .zip(&evaluated)
        .filter(|(_, fe)| fe.is_none())
        .map(|(e, _)| e.id.clone())
        .collect();
    Ok((evaluated.into_iter().flatten().collect(), skipped))
}

/// Per-year anchors from the ASDs of one or more models' fire evaluations.
fn anchors_for(evals: &[&[FireEvaluation]], geo: &GeoConfig, policy: AnchorPolicy) -> Result<BTreeMap<i32, u32>> {
    let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for model in evals {
        for fe in model.iter() {
            let entry = by_year.entry(fe.year).or_default();
            if let Some(a) = fe.asd_m {
                entry.push(a);
            }
        }
    }
    by_year
        .into_iter()
        .map(|(year, asds)| {
            let px = match policy {
                AnchorPolicy::FixedPx(k) => k,
                AnchorPolicy::MeanAsd if asds.is_empty() => {
                    return Err(Error::InvalidArgument(format!(
                        "year {year}: no fire has a defined ASD, cannot resolve the anchor"
                    )))
                }
                AnchorPolicy::MeanAsd => resolve_anchor(&asds, geo, policy)?,
            };
            Ok((year, px))
        })
        .collect()
}

/// Adds records for anchor radii that were not part of the sweep.
fn complete_anchor_records(
    evals: &mut [FireEvaluation],
    events: &[FireEvent],
    outputs: &[ModelOutput],
    references: &[ProbabilityMap],
    anchors: &BTreeMap<i32, u32>,
    config: &SweepConfig,
    geo: &GeoConfig,
) -> Result<()> {
    let index: BTreeMap<(&str, i32), usize> = events
        .iter()
        .enumerate()
        .map(|(i, e)| ((e.id.as_str(), e.year), i))
        .collect();
    evals.par_iter_mut().try_for_each(|fe| {
        let anchor = anchors[&fe.year];
        if fe.records.iter().any(|r| r.radius_px == Some(anchor)) {
            return Ok(());
        }
        let i = index[&(fe.fire_id.as_str(), fe.year)];
        let extra = evaluate_fire(&events[i], &outputs[i], &references[i], &[anchor], config, geo)?;
        let pos = fe
            .records
            .iter()
            .position(|r| r.radius_px.is_some_and(|x| x > anchor))
            .unwrap_or(fe.records.len());
        fe.records.insert(pos, extra.records.into_iter().next().expect("one radius"));
        Ok(())
    })
}

fn finish(evals: Vec<FireEvaluation>, anchors: BTreeMap<i32, u32>, skipped: Vec<String>) -> SweepResult {
    let records: Vec<MetricRecord> = evals.into_iter().flat_map(|fe| fe.records).collect();
    SweepResult {
        aggregates: aggregate_by_radius(&records),
        records,
        anchors,
        skipped,
    }
}

/// Sweeps one model. The anchor is resolved from this model's ASDs.
pub fn run_sweep(
    events: &[FireEvent],
    outputs: &[ModelOutput],
    references: &[ProbabilityMap],
    config: &SweepConfig,
    geo: &GeoConfig,
) -> Result<SweepResult> {
    config.validate()?;
    geo.validate()?;
    check_inputs(events, &[outputs], references)?;
    let (mut evals, skipped) = sweep_fires(events, outputs, references, config, geo)?;
    let anchors = anchors_for(&[&evals], geo, config.anchor)?;
    complete_anchor_records(&mut evals, events, outputs, references, &anchors, config, geo)?;
    Ok(finish(evals, anchors, skipped))
}

/// Sweeps two models against the same reference error maps; the anchor of
/// each year is resolved from the ASDs of both models pooled.
pub fn run_paired_sweep(
    events: &[FireEvent],
    outputs_a: &[ModelOutput],
    outputs_b: &[ModelOutput],
    references: &[ProbabilityMap],
    config: &SweepConfig,
    geo: &GeoConfig,
) -> Result<(SweepResult, SweepResult)> {
    config.validate()?;
    geo.validate()?;
    check_inputs(events, &[outputs_a, outputs_b], references)?;
    let (mut evals_a, skipped_a) = sweep_fires(events, outputs_a, references, config, geo)?;
    let (mut evals_b, skipped_b) = sweep_fires(events, outputs_b, references, config, geo)?;
    let anchors = anchors_for(&[&evals_a, &evals_b], geo, config.anchor)?;
    complete_anchor_records(&mut evals_a, events, outputs_a, references, &anchors, config, geo)?;
    complete_anchor_records(&mut evals_b, events, outputs_b, references, &anchors, config, geo)?;
    Ok((
        finish(evals_a, anchors.clone(), skipped_a),
        finish(evals_b, anchors, skipped_b),
    ))
}

/// Arithmetic mean and population standard deviation.
pub fn aggregate_mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot aggregate an empty list".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Percentage change of `value` relative to `baseline`.
pub fn relative_to_baseline(value: f64, baseline: f64) -> Result<f64> {
    if baseline.is_nan() || baseline <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "baseline must be positive, got {baseline}"
        )));
    }
    Ok(100.0 * (value - baseline) / baseline)
}

/// Integer percent as reported in result tables.
pub fn rounded_percent(value: f64, baseline: f64) -> Result<i64> {
    Ok(relative_to_baseline(value, baseline)?.round() as i64)
}

/// One year of a results table: segmentation metrics on the whole crop,
/// calibration and ranking at that year's anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSummary {
    pub year: i32,
    pub anchor_px: u32,
    pub n_fires: usize,
    pub metrics: BTreeMap<MetricName, MetricSummary>,
}

/// Columns of the per-year table.
pub const TABLE_METRICS: [MetricName; 6] = [
    MetricName::Ap,
    MetricName::AsdM,
    MetricName::Brier,
    MetricName::Nll,
    MetricName::Auroc,
    MetricName::Auprc,
];

pub fn year_summaries(result: &SweepResult) -> Vec<YearSummary> {
    let anchored = result.anchor_records();
    result
        .anchors
        .iter()
        .map(|(&year, &anchor_px)| {
            let recs: Vec<&MetricRecord> = anchored.iter().copied().filter(|r| r.year == year).collect();
            YearSummary {
                year,
                anchor_px,
                n_fires: recs.len(),
                metrics: summarize(&recs),
            }
        })
        .collect()
}

/// Mean ± population std over per-year means, per metric. Years whose
/// metric is entirely missing are left out.
pub fn mean_over_years(years: &[YearSummary]) -> BTreeMap<MetricName, (f64, f64)> {
    TABLE_METRICS
        .into_iter()
        .filter_map(|m| {
            let vals: Vec<f64> = years.iter().filter_map(|y| y.metrics[&m].mean).collect();
            aggregate_mean_std(&vals).ok().map(|ms| (m, ms))
        })
        .collect()
}

/// Radius that makes the region cover a `height x width` crop from any
/// nonempty ground truth.
pub fn saturation_radius(height: usize, width: usize) -> u32 {
    let diag = ((height * height + width * width) as f64).sqrt();
    diag.ceil() as u32
}

/// Every region in `radii` (nested by construction).
pub fn regions(gt: &BinaryMask, radii: &[u32]) -> Result<Vec<BinaryMask>> {
    if gt.is_empty_mask() {
        return Err(Error::EmptyGroundTruth);
    }
    let d: Grid<u64> = squared_distance_transform(gt)?;
    radii.iter().map(|&r| threshold_distance(&d, f64::from(r))).collect()
}
