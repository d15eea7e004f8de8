//! Boundary-aware evaluation of probabilistic raster segmentation forecasts.
//!
//! The crate is organised bottom-up:
//!
//! * [`raster`], [`npy`], [`dataset`]: grid types, array files, dataset layout.
//! * [`morphology`]: exact distance transform, disk dilation, boundaries.
//! * [`metrics`]: segmentation, calibration and uncertainty-ranking metrics.
//! * [`fcer`]: fire-centered evaluation regions, radius sweeps, anchors and
//!   per-year aggregation.
//! * [`stats`]: paired one-sided Wilcoxon signed-rank test.
//! * [`distill`]: ensemble fusion and the distilled uncertainty head.
//! * [`synth`] and [`oracle`]: seeded synthetic scenarios and brute-force
//!   reference implementations.

pub mod dataset;
pub mod distill;
pub mod error;
pub mod fcer;
pub mod metrics;
pub mod morphology;
pub mod npy;
pub mod oracle;
pub mod raster;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use raster::{BinaryMask, FeatureStack, FireEvent, GeoConfig, Grid, ProbabilityMap, UncertaintyMap};
