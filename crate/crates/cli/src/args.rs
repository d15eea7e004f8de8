//! Flags shared by several subcommands.

use std::path::PathBuf;

use clap::Args;
use fcer_core::fcer::{AnchorPolicy, SweepConfig};
use fcer_core::GeoConfig;
use serde::Serialize;

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,

    /// Overwrite an output directory that already holds a manifest.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GeoArgs {
    /// Ground sampling distance.
    #[arg(long, default_value_t = 375.0)]
    pub meters_per_pixel: f64,

    /// Center-crop size applied to every raster on load.
    #[arg(long, default_value_t = 128)]
    pub crop: usize,
}

impl GeoArgs {
    pub fn geo(&self) -> GeoConfig {
        GeoConfig {
            meters_per_pixel: self.meters_per_pixel,
            crop_size: self.crop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Radii(pub Vec<u32>);

/// `A..B` (inclusive) or a comma-separated list.
pub fn parse_radii(s: &str) -> Result<Radii, String> {
    let s = s.trim();
    let mut radii = if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: u32 = lo.trim().parse().map_err(|e| format!("bad radius range start: {e}"))?;
        let hi: u32 = hi.trim().parse().map_err(|e| format!("bad radius range end: {e}"))?;
        if lo > hi {
            return Err(format!("empty radius range {lo}..{hi}"));
        }
        (lo..=hi).collect::<Vec<_>>()
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|e| format!("bad radius '{p}': {e}")))
            .collect::<Result<Vec<_>, _>>()?
    };
    radii.sort_unstable();
    radii.dedup();
    Ok(Radii(radii))
}

/// `auto` (per-year mean ASD) or a fixed radius in pixels.
pub fn parse_anchor(s: &str) -> Result<AnchorPolicy, String> {
    match s.trim() {
        "auto" => Ok(AnchorPolicy::MeanAsd),
        px => px
            .parse::<u32>()
            .map(AnchorPolicy::FixedPx)
            .map_err(|_| format!("anchor must be 'auto' or a pixel count, got '{px}'")),
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvalArgs {
    /// Radii to sweep, e.g. `0..16` or `0,2,4,8`.
    #[arg(long, default_value = "0..16", value_parser = parse_radii)]
    pub radii: Radii,

    /// Anchor radius: `auto` or pixels.
    #[arg(long, default_value = "auto", value_parser = parse_anchor)]
    pub anchor: AnchorPolicy,

    /// Probability clipping for NLL.
    #[arg(long, default_value_t = 1e-7)]
    pub epsilon: f64,

    /// Threshold for predicted fire and for the error map.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

impl EvalArgs {
    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            radii_px: self.radii.0.clone(),
            anchor: self.anchor,
            error_threshold: self.threshold,
            nll_epsilon: self.epsilon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii_forms() {
        assert_eq!(parse_radii("0..3").unwrap().0, vec![0, 1, 2, 3]);
        assert_eq!(parse_radii("0..=2").unwrap().0, vec![0, 1, 2]);
        assert_eq!(parse_radii("8, 2,4,2").unwrap().0, vec![2, 4, 8]);
        assert!(parse_radii("3..1").is_err());
        assert!(parse_radii("a").is_err());
    }

    #[test]
    fn anchor_forms() {
        assert_eq!(parse_anchor("auto").unwrap(), AnchorPolicy::MeanAsd);
        assert_eq!(parse_anchor("4").unwrap(), AnchorPolicy::FixedPx(4));
        assert!(parse_anchor("-1").is_err());
    }
}
