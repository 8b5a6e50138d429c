//! `countsynth` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, DistCommand};
use manifest::RunManifest;

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest(_) => "ingest",
        Command::Synth(_) => "synth",
        Command::Metrics(_) => "metrics",
        Command::Apriori(_) => "apriori",
        Command::Calibrate(_) => "calibrate",
        Command::Sweep(_) => "sweep",
        Command::Genfixture(_) => "genfixture",
        Command::Dist { .. } => "dist",
    }
}

fn run(cli: Cli, argv: Vec<String>) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            anyhow::bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut manifest = RunManifest::start(subcommand_name(&cli.command), argv);
    let outcome = match &cli.command {
        Command::Ingest(a) => commands::ingest(a, &mut manifest)?,
        Command::Synth(a) => commands::synth(a, &mut manifest)?,
        Command::Metrics(a) => commands::metrics(a, &mut manifest)?,
        Command::Apriori(a) => commands::apriori(a, &mut manifest)?,
        Command::Calibrate(a) => commands::calibrate_cmd(a, &mut manifest)?,
        Command::Sweep(a) => commands::sweep_cmd(a, &mut manifest)?,
        Command::Genfixture(a) => commands::genfixture(a, &mut manifest)?,
        Command::Dist {
            command: DistCommand::Pmf(a),
        } => commands::dist_pmf(a)?,
    };
    let target = cli
        .manifest
        .clone()
        .or_else(|| outcome.manifest_dir.map(|d| d.join("manifest.json")));
    if let Some(path) = target {
        manifest.outputs(&outcome.written)?;
        manifest.write(&path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
