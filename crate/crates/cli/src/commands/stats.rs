use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, ValueEnum};
use fcer_core::fcer::AnchorPolicy;
use fcer_core::metrics::{MetricName, MetricRecord};
use fcer_core::stats::{pair_values, Alternative, StatsReport};
use serde::Serialize;

use crate::args::{parse_anchor, OutputArgs};
use crate::commands::sweep::{SweepSummary, SUMMARY, SWEEP_A, SWEEP_B};
use crate::manifest::{prepare_out_dir, write_manifest};
use crate::report::{read_records_csv, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Model a scores higher than model b.
    Greater,
    /// Model a scores lower than model b.
    Less,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StatsArgs {
    /// Output directory of a `sweep` run.
    #[arg(long)]
    pub sweep: PathBuf,

    /// Radius at which pairs are formed: `auto` uses each year's anchor.
    #[arg(long, default_value = "auto", value_parser = parse_anchor)]
    pub anchor: AnchorPolicy,

    #[arg(long, value_enum, default_value_t = Direction::Greater)]
    pub alternative: Direction,

    #[arg(long, value_delimiter = ',', default_value = "auroc,auprc")]
    pub metrics: Vec<String>,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct StatsFile {
    anchor: AnchorPolicy,
    anchors: BTreeMap<i32, u32>,
    tests: Vec<StatsReport>,
}

pub fn run(args: &StatsArgs) -> Result<()> {
    let metrics = args
        .metrics
        .iter()
        .map(|m| MetricName::parse(m).ok_or_else(|| anyhow!("unknown metric '{m}'")))
        .collect::<Result<Vec<_>>>()?;
    let alternative = match args.alternative {
        Direction::Greater => Alternative::Greater,
        Direction::Less => Alternative::Less,
    };
    prepare_out_dir(&args.output.out, args.output.force)?;

    let summary_path = args.sweep.join(SUMMARY);
    let summary: SweepSummary = serde_json::from_str(
        &fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?,
    )
    .with_context(|| format!("parsing {}", summary_path.display()))?;
    let a = read_records_csv(&args.sweep.join(SWEEP_A))?;
    let b = read_records_csv(&args.sweep.join(SWEEP_B))?;

    let radius_for = |year: i32| -> Result<u32> {
        match args.anchor {
            AnchorPolicy::FixedPx(px) => Ok(px),
            AnchorPolicy::MeanAsd => summary
                .anchors
                .get(&year)
                .copied()
                .ok_or_else(|| anyhow!("no anchor recorded for year {year}")),
        }
    };
    let b_index: BTreeMap<(i32, &str, Option<u32>), &MetricRecord> =
        b.iter().map(|r| ((r.year, r.fire_id.as_str(), r.radius_px), r)).collect();
    let mut rows: Vec<(&MetricRecord, &MetricRecord)> = Vec::new();
    for ra in &a {
        let r = radius_for(ra.year)?;
        if ra.radius_px != Some(r) {
            continue;
        }
        let rb = b_index
            .get(&(ra.year, ra.fire_id.as_str(), ra.radius_px))
            .ok_or_else(|| anyhow!("fire {}/{} missing from {SWEEP_B}", ra.year, ra.fire_id))?;
        rows.push((ra, rb));
    }
    if rows.is_empty() {
        return Err(anyhow!("no records at the requested anchor; was it part of the sweep radii?"));
    }

    let tests = metrics
        .iter()
        .map(|&m| {
            let (pairs, missing) = pair_values(rows.iter().map(|(ra, rb)| (ra.fire_id.as_str(), ra.get(m), rb.get(m))));
            StatsReport::compute(m.as_str(), &pairs, missing, alternative)
                .with_context(|| format!("signed-rank test on {}", m.as_str()))
        })
        .collect::<Result<Vec<_>>>()?;

    let out = &args.output.out;
    write_json(
        &out.join("stats.json"),
        &StatsFile {
            anchor: args.anchor,
            anchors: summary.anchors.clone(),
            tests: tests.clone(),
        },
    )?;
    write_manifest(
        out,
        "stats",
        args,
        &[&args.sweep.join(SWEEP_A), &args.sweep.join(SWEEP_B), &summary_path],
    )?;
    for t in &tests {
        println!(
            "{}: n={} W+={} W-={} p={:.3e} r={:.3} ({:?})",
            t.metric, t.n_pairs, t.w_plus, t.w_minus, t.p_value, t.rank_biserial, t.mode
        );
    }
    Ok(())
}
