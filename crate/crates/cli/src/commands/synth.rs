use anyhow::Result;
use clap::Args;
use fcer_core::synth::{generate_scenario, write_scenario, ScenarioSpec};
use serde::Serialize;

use crate::args::OutputArgs;
use crate::manifest::{prepare_out_dir, write_manifest};

#[derive(Args, Debug, Clone, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub output: OutputArgs,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 128)]
    pub grid_size: usize,

    #[arg(long, default_value_t = 8)]
    pub fires: usize,

    /// Years assigned to fires round-robin.
    #[arg(long, value_delimiter = ',', default_value = "2018,2019,2020,2021")]
    pub years: Vec<i32>,

    #[arg(long, default_value_t = 3)]
    pub members: usize,

    #[arg(long, default_value_t = 1)]
    pub blobs_min: usize,

    #[arg(long, default_value_t = 4)]
    pub blobs_max: usize,

    #[arg(long, default_value_t = 3.0)]
    pub radius_min: f64,

    #[arg(long, default_value_t = 12.0)]
    pub radius_max: f64,

    /// Edge softness of the smoothed ground truth, in pixels.
    #[arg(long, default_value_t = 1.5)]
    pub smoothing: f64,

    /// Width of the band where member noise is concentrated, in pixels.
    #[arg(long, default_value_t = 3.0)]
    pub boundary_width: f64,

    /// Member noise standard deviation at the fire edge.
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,

    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub bias: f64,

    #[arg(long, default_value_t = 6)]
    pub feature_channels: usize,

    #[arg(long, default_value_t = 1.0)]
    pub feature_noise: f64,
}

impl SynthArgs {
    pub fn spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            rng_seed: self.seed,
            grid_size: self.grid_size,
            n_fires: self.fires,
            years: self.years.clone(),
            n_members: self.members,
            blob_count_range: (self.blobs_min, self.blobs_max),
            blob_radius_range_px: (self.radius_min, self.radius_max),
            smoothing_px: self.smoothing,
            boundary_width_px: self.boundary_width,
            member_noise_sigma: self.noise,
            member_bias: self.bias,
            feature_channels: self.feature_channels,
            feature_noise_sigma: self.feature_noise,
        }
    }
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let spec = args.spec();
    spec.validate()?;
    prepare_out_dir(&args.output.out, args.output.force)?;
    let events = generate_scenario(&spec)?;
    write_scenario(&args.output.out, &events)?;
    write_manifest(&args.output.out, "synth", &spec, &[])?;
    eprintln!("wrote {} fires to {}", events.len(), args.output.out.display());
    Ok(())
}
