use std::collections::BTreeMap;
use std::fs;

use anyhow::{Context, Result};
use clap::Args;
use fcer_core::distill::reference_maps;
use fcer_core::fcer::{run_paired_sweep, RadiusAggregate, SweepConfig, SweepResult};
use fcer_core::GeoConfig;
use serde::{Deserialize, Serialize};

use crate::args::{EvalArgs, GeoArgs, OutputArgs};
use crate::manifest::{prepare_out_dir, write_manifest};
use crate::model::{ensure_same_fires, ModelSpec};
use crate::report::{markdown_table, write_json, write_paired_diff, write_records_csv, Table};

pub const SWEEP_A: &str = "sweep_a.csv";
pub const SWEEP_B: &str = "sweep_b.csv";
pub const SUMMARY: &str = "summary.json";

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepCmdArgs {
    /// Model hypothesised to be better (first in paired differences).
    #[arg(long)]
    pub model_a: ModelSpec,

    /// Comparison model; its dataset must hold the same fires.
    #[arg(long)]
    pub model_b: ModelSpec,

    #[command(flatten)]
    pub geo: GeoArgs,

    #[command(flatten)]
    pub eval: EvalArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kind: String,
    pub skipped: Vec<String>,
    pub per_radius: Vec<RadiusAggregate>,
    pub table: Table,
}

impl ModelSummary {
    fn new(spec: &ModelSpec, result: &SweepResult) -> Self {
        ModelSummary {
            kind: spec.kind().to_string(),
            skipped: result.skipped.clone(),
            per_radius: result.aggregates.clone(),
            table: Table::from_sweep(spec.kind(), result),
        }
    }
}

/// `summary.json` of a sweep directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub config: SweepConfig,
    pub geo: GeoConfig,
    /// Anchor radius per year, shared by both models.
    pub anchors: BTreeMap<i32, u32>,
    pub models: BTreeMap<String, ModelSummary>,
}

pub fn run(args: &SweepCmdArgs) -> Result<()> {
    let geo = args.geo.geo();
    let config = args.eval.sweep_config();
    config.validate()?;
    prepare_out_dir(&args.output.out, args.output.force)?;

    let events_a = args.model_a.load(&geo)?;
    let same_root = fs::canonicalize(args.model_a.root()).ok() == fs::canonicalize(args.model_b.root()).ok();
    let events_b = if same_root {
        None
    } else {
        let b = args.model_b.load(&geo)?;
        ensure_same_fires(&events_a, &b).context("model-b dataset does not match model-a")?;
        Some(b)
    };
    let references = reference_maps(&events_a)?;
    let outputs_a = args.model_a.outputs(&events_a, &references)?;
    let outputs_b = args.model_b.outputs(events_b.as_deref().unwrap_or(&events_a), &references)?;
    let (a, b) = run_paired_sweep(&events_a, &outputs_a, &outputs_b, &references, &config, &geo)?;

    let out = &args.output.out;
    write_records_csv(&out.join(SWEEP_A), &a.records)?;
    write_records_csv(&out.join(SWEEP_B), &b.records)?;
    write_paired_diff(&out.join("paired_diff.csv"), &a.records, &b.records)?;
    let summary = SweepSummary {
        config,
        geo,
        anchors: a.anchors.clone(),
        models: BTreeMap::from([
            ("a".to_string(), ModelSummary::new(&args.model_a, &a)),
            ("b".to_string(), ModelSummary::new(&args.model_b, &b)),
        ]),
    };
    write_json(&out.join(SUMMARY), &summary)?;
    let md = markdown_table(&[&summary.models["a"].table, &summary.models["b"].table]);
    fs::write(out.join("table.md"), &md)?;

    let mut inputs = vec![args.model_a.root()];
    inputs.extend(args.model_a.extra_inputs());
    if !same_root {
        inputs.push(args.model_b.root());
    }
    inputs.extend(args.model_b.extra_inputs());
    write_manifest(out, "sweep", args, &inputs)?;
    print!("{md}");
    Ok(())
}
