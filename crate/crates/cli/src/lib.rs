//! Command-line front end for the combined transmission and distribution solver.
//!
//! Each subcommand reads its inputs, runs, and writes versioned result files
//! into an output directory. Failures map to exit codes through [`error::CliError`].

pub mod args;
pub mod bench;
pub mod config;
pub mod error;
pub mod generate;
pub mod inputs;
pub mod output;
pub mod pvcurve;
pub mod solve;

use args::Cli;
use config::{RunConfig, Subcommand};
use error::CliError;

/// Run one parsed command line, printing a short result to stdout.
///
/// On failure an `error.json` record is written into the output directory
/// when the configuration got far enough to name one.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::from_cli(cli)?;
    let result = dispatch(&cfg);
    if let Err(e) = &result {
        if cfg.out.is_dir() {
            let _ = output::write_json(&cfg.out.join("error.json"), &e.record());
        }
    }
    result
}

fn dispatch(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.subcommand {
        Subcommand::Solve => {
            let summary = solve::cmd_solve(cfg)?;
            print!("{}", output::summary_text(&summary));
        }
        Subcommand::PvCurve => {
            let curves = pvcurve::cmd_pvcurve(cfg)?;
            println!("POI bus {}", curves.poi);
            for c in &curves.curves {
                match c.max_lf() {
                    Some(lf) => println!("{:<14} max LF {lf}", c.name),
                    None => println!("{:<14} no convergent point", c.name),
                }
            }
        }
        Subcommand::Generate => {
            let m = generate::cmd_generate(cfg)?;
            println!(
                "bundle {} with {} ports and {} feeder files",
                cfg.out.display(),
                m.counts.ports,
                m.feeders.len()
            );
        }
        Subcommand::Bench => {
            let r = bench::cmd_bench(cfg)?;
            for row in &r.rows {
                println!("k = {:<4} {:>8} unknowns  {:>10.4} s  {}", row.k, row.unknowns, row.wall_seconds, row.status);
            }
            match r.exponent {
                Some(e) => println!("log-log exponent {e:.3}"),
                None => println!("log-log exponent unavailable"),
            }
        }
    }
    Ok(())
}
