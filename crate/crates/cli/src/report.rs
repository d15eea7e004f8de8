//! CSV, JSON and Markdown emitters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fcer_core::fcer::{mean_over_years, year_summaries, SweepResult, TABLE_METRICS};
use fcer_core::metrics::{MetricName, MetricRecord};
use serde::{Deserialize, Serialize};

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_records_csv(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<MetricRecord>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

const DIFF_METRICS: [MetricName; 5] = [
    MetricName::Brier,
    MetricName::Nll,
    MetricName::Auroc,
    MetricName::Auprc,
    MetricName::ErrorPrevalence,
];

#[derive(Serialize)]
struct DiffRow<'a> {
    fire_id: &'a str,
    year: i32,
    radius_px: Option<u32>,
    metric: &'static str,
    value_a: Option<f64>,
    value_b: Option<f64>,
    diff: Option<f64>,
}

/// Long-format `a - b` differences for every fire, radius and region metric.
pub fn write_paired_diff(path: &Path, a: &[MetricRecord], b: &[MetricRecord]) -> Result<()> {
    if a.len() != b.len() {
        bail!("paired sweeps have {} and {} records", a.len(), b.len());
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for (ra, rb) in a.iter().zip(b) {
        if (ra.year, &ra.fire_id, ra.radius_px) != (rb.year, &rb.fire_id, rb.radius_px) {
            bail!("paired sweeps are misaligned at fire {}", ra.fire_id);
        }
        for m in DIFF_METRICS {
            let (va, vb) = (ra.get(m), rb.get(m));
            w.serialize(DiffRow {
                fire_id: &ra.fire_id,
                year: ra.year,
                radius_px: ra.radius_px,
                metric: m.as_str(),
                value_a: va,
                value_b: vb,
                diff: va.zip(vb).map(|(x, y)| x - y),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Table column name; ASD is reported in kilometers.
fn column(m: MetricName) -> &'static str {
    match m {
        MetricName::AsdM => "asd_km",
        other => other.as_str(),
    }
}

fn to_table_units(m: MetricName, v: f64) -> f64 {
    if m == MetricName::AsdM {
        v / 1000.0
    } else {
        v
    }
}

fn decimals(m: MetricName) -> usize {
    match m {
        MetricName::Ap | MetricName::AsdM => 2,
        _ => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub year: i32,
    pub anchor_px: u32,
    pub n_fires: usize,
    pub values: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Per-year means at each year's anchor plus mean ± population std over
/// years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub model: String,
    pub rows: Vec<TableRow>,
    pub mean: BTreeMap<String, MeanStd>,
}

impl Table {
    pub fn from_sweep(model: &str, result: &SweepResult) -> Self {
        let years = year_summaries(result);
        let rows = years
            .iter()
            .map(|y| TableRow {
                year: y.year,
                anchor_px: y.anchor_px,
                n_fires: y.n_fires,
                values: TABLE_METRICS
                    .iter()
                    .map(|&m| (column(m).to_string(), y.metrics[&m].mean.map(|v| to_table_units(m, v))))
                    .collect(),
            })
            .collect();
        let mean = mean_over_years(&years)
            .into_iter()
            .map(|(m, (mean, std))| {
                (
                    column(m).to_string(),
                    MeanStd {
                        mean: to_table_units(m, mean),
                        std: to_table_units(m, std),
                    },
                )
            })
            .collect();
        Table {
            model: model.to_string(),
            rows,
            mean,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        let mut header = vec!["model".to_string(), "year".into(), "anchor_px".into(), "n_fires".into()];
        header.extend(TABLE_METRICS.iter().map(|&m| column(m).to_string()));
        w.write_record(&header)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            let mut rec = vec![
                self.model.clone(),
                row.year.to_string(),
                row.anchor_px.to_string(),
                row.n_fires.to_string(),
            ];
            rec.extend(TABLE_METRICS.iter().map(|&m| fmt(row.values[column(m)])));
            w.write_record(&rec)?;
        }
        for (label, pick) in [("mean", 0), ("std", 1)] {
            let mut rec = vec![self.model.clone(), label.to_string(), String::new(), String::new()];
            rec.extend(TABLE_METRICS.iter().map(|&m| {
                fmt(self.mean.get(column(m)).map(|ms| if pick == 0 { ms.mean } else { ms.std }))
            }));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Markdown rows for this model under a shared header.
    pub fn markdown_rows(&self, out: &mut String) {
        for row in &self.rows {
            let _ = write!(out, "| {} | {} | {} |", self.model, row.year, row.anchor_px);
            for &m in &TABLE_METRICS {
                match row.values[column(m)] {
                    Some(v) => {
                        let _ = write!(out, " {v:.prec$} |", prec = decimals(m));
                    }
                    None => out.push_str(" n/a |"),
                }
            }
            out.push('\n');
        }
        let _ = write!(out, "| {} | Mean | |", self.model);
        for &m in &TABLE_METRICS {
            match self.mean.get(column(m)) {
                Some(ms) => {
                    let _ = write!(out, " {:.prec$}±{:.prec$} |", ms.mean, ms.std, prec = decimals(m));
                }
                None => out.push_str(" n/a |"),
            }
        }
        out.push('\n');
    }
}

pub fn markdown_table(tables: &[&Table]) -> String {
    let mut out = String::from("| Model | Year | Anchor (px) | AP | ASD (km) | Brier | NLL | AUROC | AUPRC |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for t in tables {
        t.markdown_rows(&mut out);
    }
    out
}
