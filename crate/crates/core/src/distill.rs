//! Ensemble teacher and distilled single-pass uncertainty head.
//!
//! The teacher averages member probabilities and measures disagreement as the
//! per-pixel sample standard deviation (divisor `n - 1`) divided by its
//! largest attainable value for `n` members in `[0, 1]`.
//!
//! The student is a per-pixel linear map of frozen backbone features followed
//! by a sigmoid. It is fitted to the teacher's normalized uncertainty with
//! per-image RMSLE averaged over each mini-batch, using SGD with momentum,
//! coupled L2 weight decay and a per-epoch polynomial learning-rate decay.
//! The retained checkpoint is the epoch with the highest validation AUROC
//! inside the evaluation region at the selection anchor.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcer::build_fcer;
use crate::metrics::{average_precision, error_map, missing_if_degenerate, uq_auroc};
use crate::raster::{BinaryMask, FeatureStack, FireEvent, Grid, ProbabilityMap, UncertaintyMap};

/// Largest sample standard deviation of `n >= 2` values in `[0, 1]`.
///
/// Sample variance is convex, so the maximum sits on a vertex of the cube:
/// `k` ones and `n - k` zeros with `k = floor(n / 2)`.
pub fn sigma_max(n: usize) -> f64 {
    assert!(n >= 2, "sample std needs at least two members");
    let k = (n / 2) as f64;
    let n = n as f64;
    (k * (n - k) / (n * (n - 1.0))).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherOutput {
    pub mean_prob: ProbabilityMap,
    /// Normalized to `[0, 1]`.
    pub uncertainty: UncertaintyMap,
    pub n_members: usize,
}

/// Mean probability and normalized disagreement of an ensemble.
pub fn fuse_ensemble(members: &[ProbabilityMap]) -> Result<TeacherOutput> {
    let n = members.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "ensemble fusion needs at least 2 members, got {n}"
        )));
    }
    let (h, w) = members[0].shape();
    for m in &members[1..] {
        members[0].ensure_same_shape(m.grid())?;
    }
    let scale = sigma_max(n);
    let mut mean_px = Vec::with_capacity(h * w);
    let mut unc_px = Vec::with_capacity(h * w);
    for i in 0..h * w {
        let mean = members.iter().map(|m| f64::from(m.values()[i])).sum::<f64>() / n as f64;
        let ss: f64 = members
            .iter()
            .map(|m| {
                let d = f64::from(m.values()[i]) - mean;
                d * d
            })
            .sum();
        let std = (ss / (n - 1) as f64).sqrt();
        mean_px.push(mean.clamp(0.0, 1.0) as f32);
        unc_px.push((std / scale).min(1.0) as f32);
    }
    Ok(TeacherOutput {
        mean_prob: ProbabilityMap::new(Grid::new(h, w, mean_px)?)?,
        uncertainty: UncertaintyMap::normalized(Grid::new(h, w, unc_px)?)?,
        n_members: n,
    })
}

/// Index of the member with the median AP; among equal APs the lowest
/// index wins.
pub fn select_middle_member(per_member_ap: &[f64]) -> Result<usize> {
    let n = per_member_ap.len();
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "median member needs an odd member count, got {n}"
        )));
    }
    if per_member_ap.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("member AP values must be finite".into()));
    }
    let mut sorted = per_member_ap.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    Ok(per_member_ap.iter().position(|&v| v == median).expect("median is a member"))
}

/// Middle-AP member of each year: members are ranked by their mean
/// unmasked AP over that year's fires (fires with an undefined AP are
/// skipped).
pub fn middle_members_by_year(events: &[FireEvent]) -> Result<BTreeMap<i32, usize>> {
    let mut sums: BTreeMap<i32, Vec<(f64, usize)>> = BTreeMap::new();
    for e in events {
        let acc = sums.entry(e.year).or_insert_with(|| vec![(0.0, 0); e.members.len()]);
        if acc.len() != e.members.len() {
            return Err(Error::Validation(format!(
                "fire {}: {} members, expected {}",
                e.id,
                e.members.len(),
                acc.len()
            )));
        }
        for (slot, m) in acc.iter_mut().zip(&e.members) {
            if let Some(ap) = missing_if_degenerate(average_precision(m, &e.gt, None))? {
                slot.0 += ap;
                slot.1 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|(year, acc)| {
            let means = acc
                .iter()
                .map(|&(s, n)| {
                    if n == 0 {
                        Err(Error::Validation(format!("year {year}: no fire has a defined member AP")))
                    } else {
                        Ok(s / n as f64)
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((year, select_middle_member(&means)?))
        })
        .collect()
}

/// The middle-AP member's map for every fire, in event order.
pub fn reference_maps(events: &[FireEvent]) -> Result<Vec<ProbabilityMap>> {
    let chosen = middle_members_by_year(events)?;
    Ok(events.iter().map(|e| e.members[chosen[&e.year]].clone()).collect())
}

/// Root mean squared log error between student and teacher maps.
pub fn rmsle(student: &UncertaintyMap, teacher: &UncertaintyMap) -> Result<f64> {
    student.ensure_same_shape(teacher.grid())?;
    let n = student.len() as f64;
    let ss: f64 = student
        .values()
        .iter()
        .zip(teacher.values())
        .map(|(&s, &t)| {
            let d = f64::from(t).ln_1p() - f64::from(s).ln_1p();
            d * d
        })
        .sum();
    Ok((ss / n).sqrt())
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

/// `1x1` convolution plus sigmoid over a feature stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl UncertaintyHead {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        UncertaintyHead { weights, bias }
    }

    pub fn channels(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, features: &FeatureStack) -> Result<()> {
        if features.channels() != self.channels() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.channels()],
                found: vec![features.channels()],
            });
        }
        Ok(())
    }

    /// Pre-activation `w . f + b` at every pixel.
    fn logits(&self, features: &FeatureStack) -> Vec<f64> {
        let mut z = vec![self.bias; features.pixels()];
        for (c, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (zi, &f) in z.iter_mut().zip(features.channel(c)) {
                *zi += w * f64::from(f);
            }
        }
        z
    }

    fn predict(&self, features: &FeatureStack) -> Vec<f64> {
        self.logits(features).into_iter().map(sigmoid).collect()
    }
}

/// Applies the head to every pixel of a feature stack.
pub fn apply_head(head: &UncertaintyHead, features: &FeatureStack) -> Result<UncertaintyMap> {
    head.check(features)?;
    let values = head.predict(features).into_iter().map(|s| s as f32).collect();
    UncertaintyMap::new(Grid::new(features.height(), features.width(), values)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub poly_power: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub selection_anchor_px: u32,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-3,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 4,
            poly_power: 0.9,
            max_epochs: 200,
            patience: 20,
            selection_anchor_px: 4,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")))
            }
        };
        nonneg("lr0", self.lr0)?;
        nonneg("weight_decay", self.weight_decay)?;
        nonneg("poly_power", self.poly_power)?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidArgument(
                "batch_size, max_epochs and patience must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate for zero-based `epoch`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let frac = 1.0 - epoch as f64 / self.max_epochs as f64;
        self.lr0 * frac.max(0.0).powf(self.poly_power)
    }
}

/// Cached training pair: backbone features and the teacher target.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillSample {
    pub features: FeatureStack,
    pub teacher: UncertaintyMap,
    log_teacher: Vec<f64>,
}

impl DistillSample {
    pub fn new(features: FeatureStack, teacher: UncertaintyMap) -> Result<Self> {
        if features.shape() != teacher.shape() {
            return Err(Error::ShapeMismatch {
                expected: vec![features.height(), features.width()],
                found: vec![teacher.height(), teacher.width()],
            });
        }
        let log_teacher = teacher.values().iter().map(|&t| f64::from(t).ln_1p()).collect();
        Ok(DistillSample {
            features,
            teacher,
            log_teacher,
        })
    }

    /// RMSLE of `head` on this image.
    pub fn loss(&self, head: &UncertaintyHead) -> f64 {
        let s = head.predict(&self.features);
        let ss: f64 = s
            .iter()
            .zip(&self.log_teacher)
            .map(|(&s, &lt)| {
                let d = lt - s.ln_1p();
                d * d
            })
            .sum();
        (ss / s.len() as f64).sqrt()
    }

    /// Loss and its gradient with respect to `(weights, bias)`.
    fn loss_and_grad(&self, head: &UncertaintyHead, grad_w: &mut [f64], grad_b: &mut f64, scale: f64) -> f64 {
        let s = head.predict(&self.features);
        let n = s.len() as f64;
        let diffs: Vec<f64> = s.iter().zip(&self.log_teacher).map(|(&s, &lt)| s.ln_1p() - lt).collect();
        let loss = (diffs.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
        if loss == 0.0 {
            return 0.0;
        }
        // dL/dz_i = (ln(1+s_i) - ln(1+t_i)) / (N L) * s_i (1 - s_i) / (1 + s_i)
        let dz: Vec<f64> = diffs
            .iter()
            .zip(&s)
            .map(|(&d, &s)| scale * d / (n * loss) * s * (1.0 - s) / (1.0 + s))
            .collect();
        *grad_b += dz.iter().sum::<f64>();
        for (c, g) in grad_w.iter_mut().enumerate() {
            *g += dz
                .iter()
                .zip(self.features.channel(c))
                .map(|(&d, &f)| d * f64::from(f))
                .sum::<f64>();
        }
        loss
    }
}

/// Mean per-image RMSLE over a batch and its gradient `(d/dw, d/db)`.
pub fn batch_loss_and_grad(head: &UncertaintyHead, batch: &[&DistillSample]) -> (f64, Vec<f64>, f64) {
    let mut gw = vec![0.0; head.channels()];
    let mut gb = 0.0;
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for s in batch {
        loss += s.loss_and_grad(head, &mut gw, &mut gb, scale);
    }
    (loss * scale, gw, gb)
}

/// Validation image: its training pair plus the region and error map used
/// for checkpoint selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSample {
    pub sample: DistillSample,
    pub region: BinaryMask,
    pub errors: BinaryMask,
}

impl ValidationSample {
    /// Region is the ground truth dilated by `anchor_px`; errors come from
    /// thresholding `reference`.
    pub fn new(
        sample: DistillSample,
        gt: &BinaryMask,
        reference: &ProbabilityMap,
        anchor_px: u32,
        threshold: f64,
    ) -> Result<Self> {
        let region = build_fcer(gt, anchor_px)?;
        let errors = error_map(reference, gt, threshold)?;
        region.ensure_same_shape(sample.teacher.grid())?;
        Ok(ValidationSample {
            sample,
            region,
            errors,
        })
    }

    /// AUROC of the head's uncertainty inside the region, `None` when the
    /// region holds a single class.
    pub fn auroc(&self, head: &UncertaintyHead) -> Result<Option<f64>> {
        let unc = apply_head(head, &self.sample.features)?;
        missing_if_degenerate(uq_auroc(&unc, &self.errors, Some(&self.region)))
    }
}

/// SGD with momentum and coupled weight decay:
/// `v <- m v + (g + wd p)`, `p <- p - lr v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(n_params: usize, momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            momentum,
            weight_decay,
            velocity: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        for ((p, &g), v) in params.iter_mut().zip(grad).zip(&mut self.velocity) {
            let g = g + self.weight_decay * *p;
            *v = self.momentum * *v + g;
            *p -= lr * *v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_rmsle: f64,
    pub val_rmsle: f64,
    pub val_auroc_at_anchor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub head: UncertaintyHead,
    /// 1-based epoch of the retained checkpoint (0 = initial head).
    pub best_epoch: usize,
    pub best_val_auroc: Option<f64>,
    pub best_val_rmsle: f64,
    pub log: Vec<EpochLog>,
    pub stopped_early: bool,
}

/// Zero weights and the bias at the logit of the mean teacher value.
pub fn initial_head(channels: usize, train: &[DistillSample]) -> UncertaintyHead {
    let (sum, n) = train.iter().fold((0.0, 0usize), |(s, n), d| {
        (
            s + d.teacher.values().iter().map(|&t| f64::from(t)).sum::<f64>(),
            n + d.teacher.len(),
        )
    });
    let mean = if n > 0 { sum / n as f64 } else { 0.5 };
    UncertaintyHead::new(vec![0.0; channels], logit(mean))
}

fn mean_loss(head: &UncertaintyHead, samples: impl Iterator<Item = impl std::ops::Deref<Target = DistillSample>>) -> f64 {
    let (sum, n) = samples.fold((0.0, 0usize), |(s, n), d| (s + d.loss(head), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn mean_auroc(head: &UncertaintyHead, val: &[ValidationSample]) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut n = 0;
    for v in val {
        if let Some(a) = v.auroc(head)? {
            sum += a;
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// `(auroc, -rmsle)` ordering; a missing AUROC ranks below any value.
fn improves(auroc: Option<f64>, rmsle: f64, best_auroc: Option<f64>, best_rmsle: f64) -> bool {
    match (auroc, best_auroc) {
        (Some(a), Some(b)) if a != b => a > b,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        _ => rmsle < best_rmsle,
    }
}

/// Trains a head from the default initialisation.
pub fn train_head(train: &[DistillSample], val: &[ValidationSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let channels = train
        .first()
        .ok_or_else(|| Error::InvalidArgument("training set is empty".into()))?
        .features
        .channels();
    train_head_from(initial_head(channels, train), train, val, cfg)
}

/// Trains starting from `init`. Epoch `e` (0-based) uses
/// `lr0 (1 - e / max_epochs)^poly_power`. Training stops once `patience`
/// consecutive epochs improve neither the selection score nor the lowest
/// validation RMSLE.
pub fn train_head_from(
    init: UncertaintyHead,
    train: &[DistillSample],
    val: &[ValidationSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let channels = init.channels();
    for s in train.iter().chain(val.iter().map(|v| &v.sample)) {
        if s.features.channels() != channels {
            return Err(Error::ShapeMismatch {
                expected: vec![channels],
                found: vec![s.features.channels()],
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut params: Vec<f64> = init.weights.iter().copied().chain([init.bias]).collect();
    let mut opt = Sgd::new(params.len(), cfg.momentum, cfg.weight_decay);
    let to_head = |p: &[f64]| UncertaintyHead::new(p[..channels].to_vec(), p[channels]);

    let val_loss = |h: &UncertaintyHead| mean_loss(h, val.iter().map(|v| &v.sample));
    let mut best = init.clone();
    let mut best_auroc = mean_auroc(&init, val)?;
    let mut best_rmsle = val_loss(&init);
    let mut best_epoch = 0;
    let mut lowest_rmsle = best_rmsle;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut log = Vec::with_capacity(cfg.max_epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.max_epochs {
        let lr = cfg.learning_rate(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&DistillSample> = chunk.iter().map(|&i| &train[i]).collect();
            let (_, gw, gb) = batch_loss_and_grad(&to_head(&params), &batch);
            let grad: Vec<f64> = gw.into_iter().chain([gb]).collect();
            opt.step(&mut params, &grad, lr);
        }

        let head = to_head(&params);
        let val_auroc = mean_auroc(&head, val)?;
        let val_rmsle = val_loss(&head);
        log.push(EpochLog {
            epoch: epoch + 1,
            lr,
            train_rmsle: mean_loss(&head, train.iter()),
            val_rmsle,
            val_auroc_at_anchor: val_auroc,
        });

        let selected = improves(val_auroc, val_rmsle, best_auroc, best_rmsle);
        let lower_loss = val_rmsle < lowest_rmsle;
        lowest_rmsle = lowest_rmsle.min(val_rmsle);
        if selected {
            best = head;
            best_auroc = val_auroc;
            best_rmsle = val_rmsle;
            best_epoch = epoch + 1;
        }
        if selected || lower_loss {
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        head: best,
        best_epoch,
        best_val_auroc: best_auroc,
        best_val_rmsle: best_rmsle,
        log,
        stopped_early,
    })
}

/// Serialized head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadCheckpoint {
    pub channels: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub train_config: TrainConfig,
    pub selection_metric: String,
    pub selection_value: Option<f64>,
    pub epoch: usize,
}

impl HeadCheckpoint {
    pub fn from_outcome(outcome: &TrainOutcome, cfg: &TrainConfig) -> Self {
        HeadCheckpoint {
            channels: outcome.head.channels(),
            weights: outcome.head.weights.clone(),
            bias: outcome.head.bias,
            train_config: cfg.clone(),
            selection_metric: "val_auroc_at_anchor".into(),
            selection_value: outcome.best_val_auroc,
            epoch: outcome.best_epoch,
        }
    }

    pub fn head(&self) -> Result<UncertaintyHead> {
        if self.weights.len() != self.channels {
            return Err(Error::Validation(format!(
                "checkpoint declares {} channels but holds {} weights",
                self.channels,
                self.weights.len()
            )));
        }
        Ok(UncertaintyHead::new(self.weights.clone(), self.bias))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: HeadCheckpoint = serde_json::from_str(text)?;
        c.head()?;
        Ok(c)
    }
}
