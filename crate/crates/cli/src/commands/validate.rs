use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use fcer_core::dataset::load_dataset;
use fcer_core::Error;

use crate::args::GeoArgs;

#[derive(Args, Debug, Clone)]
pub struct ValidateArgs {
    /// Dataset root.
    #[arg(long)]
    pub data: PathBuf,

    #[command(flatten)]
    pub geo: GeoArgs,
}

/// Loads every fire, reporting counts per year. Empty ground truth is a
/// degenerate-data failure.
pub fn run(args: &ValidateArgs) -> Result<()> {
    let events = load_dataset(&args.data, &args.geo.geo())
        .with_context(|| format!("validating {}", args.data.display()))?;
    let mut per_year: BTreeMap<i32, usize> = BTreeMap::new();
    for e in &events {
        *per_year.entry(e.year).or_default() += 1;
    }
    let members = events[0].members.len();
    let with_features = events.iter().filter(|e| e.features.is_some()).count();
    let with_student = events.iter().filter(|e| e.student_uncertainty.is_some()).count();
    println!(
        "{} fires, {members} members each, {with_features} with features, {with_student} with student maps",
        events.len()
    );
    for (year, n) in &per_year {
        println!("  {year}: {n} fires");
    }
    let empty: Vec<String> = events
        .iter()
        .filter(|e| e.gt.is_empty_mask())
        .map(|e| format!("{}/{}", e.year, e.id))
        .collect();
    if !empty.is_empty() {
        return Err(Error::EmptyGroundTruth).context(format!("fires with empty ground truth: {}", empty.join(", ")));
    }
    Ok(())
}
