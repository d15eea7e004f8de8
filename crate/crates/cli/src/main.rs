//! `fcer`: evaluation, distillation and statistics over fire-spread
//! forecast datasets.
//!
//! Exit status: 0 on success, 1 on invalid input or usage, 2 when the data
//! are degenerate (empty ground truth, single-class regions, all-zero
//! paired differences).

mod args;
mod commands;
mod manifest;
mod model;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "fcer", version, about = "Boundary-aware evaluation of probabilistic fire-spread forecasts")]
struct Cli {
    /// Worker threads (0 = one per core). Never changes any output.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic dataset.
    Synth(commands::synth::SynthArgs),
    /// Check a dataset's layout, shapes and value ranges.
    Validate(commands::validate::ValidateArgs),
    /// Per-year table for one model at the resolved anchor.
    Eval(commands::eval::EvalCmdArgs),
    /// Radius sweep of two models with paired differences.
    Sweep(commands::sweep::SweepCmdArgs),
    /// One-sided signed-rank tests on a sweep's anchor records.
    Stats(commands::stats::StatsArgs),
    /// Train the single-pass uncertainty head against the ensemble teacher.
    Distill(commands::distill::DistillArgs),
}

fn dispatch(command: &Command) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Validate(a) => commands::validate::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Sweep(a) => commands::sweep::run(a),
        Command::Stats(a) => commands::stats::run(a),
        Command::Distill(a) => commands::distill::run(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let degenerate = err
        .chain()
        .any(|e| e.downcast_ref::<fcer_core::Error>().is_some_and(fcer_core::Error::is_degenerate));
    if degenerate {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(anyhow::Error::from)
        .and_then(|pool| pool.install(|| dispatch(&cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
