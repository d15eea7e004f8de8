use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use fcer_core::dataset::{fire_dir, load_dataset, STUDENT_UNC_FILE};
use fcer_core::distill::{
    apply_head, fuse_ensemble, reference_maps, train_head, DistillSample, HeadCheckpoint, TrainConfig,
    ValidationSample,
};
use fcer_core::npy::save_grid;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{GeoArgs, OutputArgs};
use crate::manifest::{prepare_out_dir, write_manifest};
use crate::report::write_json;

#[derive(Args, Debug, Clone, Serialize)]
pub struct DistillArgs {
    /// Dataset root with `features.npy` for every fire.
    #[arg(long)]
    pub data: PathBuf,

    /// Years held out for checkpoint selection (default: the last year).
    #[arg(long, value_delimiter = ',')]
    pub val_years: Vec<i32>,

    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,

    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,

    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,

    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,

    #[arg(long, default_value_t = 0.9)]
    pub poly_power: f64,

    #[arg(long, default_value_t = 200)]
    pub epochs: usize,

    #[arg(long, default_value_t = 20)]
    pub patience: usize,

    /// FCER radius (pixels) for the validation AUROC used in selection.
    #[arg(long, default_value_t = 4)]
    pub selection_anchor: u32,

    /// Threshold of the reference member's error map.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,

    /// Seed of the mini-batch shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub geo: GeoArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}

impl DistillArgs {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr0: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            poly_power: self.poly_power,
            max_epochs: self.epochs,
            patience: self.patience,
            selection_anchor_px: self.selection_anchor,
            rng_seed: self.seed,
        }
    }
}

/// Caches teacher targets, trains the head, and writes the checkpoint, the
/// per-epoch log and a student uncertainty map for every fire.
pub fn run(args: &DistillArgs) -> Result<()> {
    let cfg = args.train_config();
    cfg.validate()?;
    prepare_out_dir(&args.output.out, args.output.force)?;

    let events = load_dataset(&args.data, &args.geo.geo())?;
    if let Some(e) = events.iter().find(|e| e.features.is_none()) {
        bail!("fire {}/{} has no features.npy", e.year, e.id);
    }
    let years: Vec<i32> = {
        let mut y: Vec<i32> = events.iter().map(|e| e.year).collect();
        y.dedup();
        y
    };
    let val_years = if args.val_years.is_empty() {
        vec![*years.last().expect("dataset is nonempty")]
    } else {
        args.val_years.clone()
    };
    if years.iter().all(|y| val_years.contains(y)) {
        bail!("validation years {val_years:?} leave no training fires");
    }

    let references = reference_maps(&events)?;
    let samples: Vec<DistillSample> = events
        .par_iter()
        .map(|e| {
            let teacher = fuse_ensemble(&e.members).with_context(|| format!("fire {}", e.id))?;
            Ok(DistillSample::new(e.features.clone().expect("checked"), teacher.uncertainty)?)
        })
        .collect::<Result<_>>()?;

    let mut train = Vec::new();
    let mut val = Vec::new();
    for ((e, s), r) in events.iter().zip(samples).zip(&references) {
        if !val_years.contains(&e.year) {
            train.push(s);
        } else if !e.gt.is_empty_mask() {
            val.push(ValidationSample::new(s, &e.gt, r, cfg.selection_anchor_px, args.threshold)?);
        }
    }
    if val.is_empty() {
        bail!("no validation fire with nonempty ground truth in years {val_years:?}");
    }

    let outcome = train_head(&train, &val, &cfg)?;
    let out = &args.output.out;
    let checkpoint = HeadCheckpoint::from_outcome(&outcome, &cfg);
    write_json(&out.join("head.json"), &checkpoint)?;
    let mut log = csv::Writer::from_path(out.join("training_log.csv"))?;
    for row in &outcome.log {
        log.serialize(row)?;
    }
    log.flush()?;

    let maps = out.join("maps");
    events.par_iter().try_for_each(|e| -> Result<()> {
        let unc = apply_head(&outcome.head, e.features.as_ref().expect("checked"))?;
        let dir = fire_dir(&maps, e.year, &e.id);
        std::fs::create_dir_all(&dir)?;
        save_grid(&dir.join(STUDENT_UNC_FILE), unc.grid())?;
        Ok(())
    })?;

    write_manifest(out, "distill", args, &[&args.data])?;
    println!(
        "trained on {} fires, validated on {}; kept epoch {} (val AUROC {}, val RMSLE {:.5}){}",
        train.len(),
        val.len(),
        outcome.best_epoch,
        outcome.best_val_auroc.map_or("n/a".into(), |a| format!("{a:.4}")),
        outcome.best_val_rmsle,
        if outcome.stopped_early { ", stopped early" } else { "" }
    );
    Ok(())
}
