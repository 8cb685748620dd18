mod commands;
mod config;
mod output;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use crate::commands::Outcome;
use crate::config::{parse_ids, Cli, Command, RunConfig, UsageError};

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = RunConfig::from_cli(cli)?;
    match &cli.command {
        Command::Examples { id, points, .. } => commands::examples(&cfg, &parse_ids(id)?, *points),
        Command::Norms { id, kind, field, alpha } => {
            let ids = parse_ids(id)?;
            if ids.len() != 1 {
                return Err(UsageError("norms takes a single --id".into()).into());
            }
            commands::norms(&cfg, ids[0], *kind, *field, *alpha)
        }
        Command::Weakform { id } => commands::weakform(&cfg, &parse_ids(id)?),
        Command::Barrier { .. } => commands::barrier(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => {
            eprintln!("{}", o.summary);
            ExitCode::from(if o.pass { 0 } else { 1 })
        }
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("driftlab: usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("driftlab: {e:#}");
            ExitCode::from(1)
        }
    }
}
