//! Seeded synthetic fire scenarios.
//!
//! Each fire draws from its own ChaCha8 stream seeded with
//! `splitmix64(rng_seed ^ splitmix64(fire_index))`, so fires can be
//! generated in any order or in parallel with identical results.
//!
//! Ground truth is a union of random disks. With `sd` the signed distance to
//! the fire edge (negative inside), every member is
//! `clip(sigmoid(-sd / smoothing_px) + bias + sigma * env * z, 0, 1)` where
//! `env = exp(-sd^2 / (2 boundary_width_px^2))` and `z` is i.i.d. standard
//! normal, so ensemble disagreement concentrates along the edge. Features are
//! the member logits, the clipped edge distance in units of
//! `boundary_width_px`, then Gaussian noise channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dataset::write_fire;
use crate::error::{Error, Result};
use crate::morphology::euclidean_distance_transform;
use crate::raster::{BinaryMask, FeatureStack, FireEvent, Grid, ProbabilityMap};

/// Edge distance saturates at this many boundary widths in the feature channel.
const DISTANCE_FEATURE_CAP: f64 = 4.0;
const LOGIT_CLAMP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub rng_seed: u64,
    pub grid_size: usize,
    pub n_fires: usize,
    /// Fires are assigned to years round-robin.
    pub years: Vec<i32>,
    pub n_members: usize,
    /// Inclusive.
    pub blob_count_range: (usize, usize),
    /// Inclusive.
    pub blob_radius_range_px: (f64, f64),
    pub smoothing_px: f64,
    pub boundary_width_px: f64,
    pub member_noise_sigma: f64,
    pub member_bias: f64,
    /// At least `n_members + 1`.
    pub feature_channels: usize,
    pub feature_noise_sigma: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            rng_seed: 0,
            grid_size: 128,
            n_fires: 8,
            years: vec![2018, 2019, 2020, 2021],
            n_members: 3,
            blob_count_range: (1, 4),
            blob_radius_range_px: (3.0, 12.0),
            smoothing_px: 1.5,
            boundary_width_px: 3.0,
            member_noise_sigma: 0.3,
            member_bias: 0.0,
            feature_channels: 6,
            feature_noise_sigma: 1.0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.grid_size == 0 || self.n_fires == 0 || self.n_members == 0 {
            return bad("grid_size, n_fires and n_members must be at least 1".into());
        }
        if self.years.is_empty() {
            return bad("at least one year is required".into());
        }
        let (lo, hi) = self.blob_count_range;
        if lo == 0 || lo > hi {
            return bad(format!("blob count range [{lo}, {hi}] must be nonempty and start at 1 or more"));
        }
        let (rlo, rhi) = self.blob_radius_range_px;
        if !(rlo.is_finite() && rhi.is_finite()) || rlo < 0.0 || rlo > rhi {
            return bad(format!("blob radius range [{rlo}, {rhi}] must be nonempty and nonnegative"));
        }
        for (name, v) in [("smoothing_px", self.smoothing_px), ("boundary_width_px", self.boundary_width_px)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("member_noise_sigma", self.member_noise_sigma),
            ("feature_noise_sigma", self.feature_noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if !self.member_bias.is_finite() {
            return bad("member_bias must be finite".into());
        }
        if self.feature_channels < self.n_members + 1 {
            return bad(format!(
                "feature_channels must be at least n_members + 1 = {}, got {}",
                self.n_members + 1,
                self.feature_channels
            ));
        }
        Ok(())
    }

    pub fn fire_id(index: usize) -> String {
        format!("fire_{index:04}")
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fire_seed(rng_seed: u64, index: usize) -> u64 {
    splitmix64(rng_seed ^ splitmix64(index as u64))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Signed Euclidean distance to the mask edge in pixels: positive outside
/// (distance to the nearest foreground pixel), negative inside (minus the
/// distance to the nearest background pixel).
pub fn signed_distance(mask: &BinaryMask) -> Result<Grid<f64>> {
    let outside = euclidean_distance_transform(mask)?;
    let bg = mask.complement();
    let (h, w) = mask.shape();
    let inside = if bg.is_empty_mask() {
        Grid::filled(h, w, (h.max(w)) as f64)?
    } else {
        euclidean_distance_transform(&bg)?
    };
    Grid::new(
        h,
        w,
        outside.values().iter().zip(inside.values()).map(|(&o, &i)| o - i).collect(),
    )
}

fn disk_union(rng: &mut ChaCha8Rng, spec: &ScenarioSpec) -> Result<BinaryMask> {
    let n = spec.grid_size;
    let count = rng.random_range(spec.blob_count_range.0..=spec.blob_count_range.1);
    let (rlo, rhi) = spec.blob_radius_range_px;
    let blobs: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| {
            let cy = rng.random_range(0..n) as f64;
            let cx = rng.random_range(0..n) as f64;
            let r = if rlo == rhi { rlo } else { rng.random_range(rlo..=rhi) };
            (cy, cx, r)
        })
        .collect();
    // each center is a pixel, so the union is never empty
    BinaryMask::from_bools(
        n,
        n,
        (0..n * n).map(|i| {
            let (y, x) = ((i / n) as f64, (i % n) as f64);
            blobs
                .iter()
                .any(|&(cy, cx, r)| ((y - cy).powi(2) + (x - cx).powi(2)).sqrt() <= r)
        }),
    )
}

/// Generates fire `index` of the scenario.
pub fn generate_fire(spec: &ScenarioSpec, index: usize) -> Result<FireEvent> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(fire_seed(spec.rng_seed, index));
    let n = spec.grid_size;
    let gt = disk_union(&mut rng, spec)?;
    let sd = signed_distance(&gt)?;
    let width2 = 2.0 * spec.boundary_width_px * spec.boundary_width_px;

    let smooth: Vec<f64> = sd.values().iter().map(|&d| sigmoid(-d / spec.smoothing_px)).collect();
    let envelope: Vec<f64> = sd.values().iter().map(|&d| (-d * d / width2).exp()).collect();

    let mut members = Vec::with_capacity(spec.n_members);
    let mut features = Vec::with_capacity(spec.feature_channels * n * n);
    for _ in 0..spec.n_members {
        let p: Vec<f32> = smooth
            .iter()
            .zip(&envelope)
            .map(|(&s, &e)| {
                let z: f64 = rng.sample(StandardNormal);
                (s + spec.member_bias + spec.member_noise_sigma * e * z).clamp(0.0, 1.0) as f32
            })
            .collect();
        features.extend(p.iter().map(|&v| {
            let v = f64::from(v).clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
            (v / (1.0 - v)).ln() as f32
        }));
        members.push(ProbabilityMap::from_vec(n, n, p)?);
    }
    features.extend(
        sd.values()
            .iter()
            .map(|&d| (d.abs() / spec.boundary_width_px).min(DISTANCE_FEATURE_CAP) as f32),
    );
    for _ in spec.n_members + 1..spec.feature_channels {
        for _ in 0..n * n {
            let z: f64 = rng.sample(StandardNormal);
            features.push((spec.feature_noise_sigma * z) as f32);
        }
    }

    let event = FireEvent {
        id: ScenarioSpec::fire_id(index),
        year: spec.years[index % spec.years.len()],
        gt,
        members,
        student_uncertainty: None,
        features: Some(FeatureStack::new(spec.feature_channels, n, n, features)?),
    };
    event.validate()?;
    Ok(event)
}

/// All fires of the scenario, in index order.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Vec<FireEvent>> {
    spec.validate()?;
    (0..spec.n_fires).into_par_iter().map(|i| generate_fire(spec, i)).collect()
}

/// Writes events in the dataset layout under `root`.
pub fn write_scenario(root: &Path, events: &[FireEvent]) -> Result<()> {
    events.par_iter().try_for_each(|e| write_fire(root, e))
}
