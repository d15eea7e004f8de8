use anyhow::Result;
use clap::Args;
use fcer_core::distill::reference_maps;
use fcer_core::fcer::run_sweep;
use serde::Serialize;

use crate::args::{EvalArgs, GeoArgs, OutputArgs};
use crate::manifest::{prepare_out_dir, write_manifest};
use crate::model::ModelSpec;
use crate::report::{markdown_table, write_json, write_records_csv, Table};

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvalCmdArgs {
    /// `ensemble:<dir>`, `student:<dir>:<head.json>` or `student:<dir>`.
    #[arg(long)]
    pub model: ModelSpec,

    #[command(flatten)]
    pub geo: GeoArgs,

    #[command(flatten)]
    pub eval: EvalArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}

/// Per-year and mean ± std table at each year's anchor for one model.
pub fn run(args: &EvalCmdArgs) -> Result<()> {
    let geo = args.geo.geo();
    let config = args.eval.sweep_config();
    config.validate()?;
    prepare_out_dir(&args.output.out, args.output.force)?;

    let events = args.model.load(&geo)?;
    let references = reference_maps(&events)?;
    let outputs = args.model.outputs(&events, &references)?;
    let result = run_sweep(&events, &outputs, &references, &config, &geo)?;

    let out = &args.output.out;
    let table = Table::from_sweep(args.model.kind(), &result);
    write_records_csv(&out.join("sweep.csv"), &result.records)?;
    table.write_csv(&out.join("table.csv"))?;
    write_json(&out.join("table.json"), &table)?;
    std::fs::write(out.join("table.md"), markdown_table(&[&table]))?;

    let mut inputs = vec![args.model.root()];
    inputs.extend(args.model.extra_inputs());
    write_manifest(out, "eval", args, &inputs)?;
    print!("{}", markdown_table(&[&table]));
    Ok(())
}
