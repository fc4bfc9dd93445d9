mod commands;
mod report;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trainspace::Error;

use report::Report;
use settings::Settings;

#[derive(Parser)]
#[command(
    name = "trainspace",
    version,
    about = "Spectral and statistical analysis of training matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Load and normalize a dataset, writing the training matrix.
    Ingest,
    /// Gram matrices, vertex degrees and the training graph.
    Gram,
    /// Regularized inverses and projection diagonals.
    Project,
    /// Pearson correlations between leading observations.
    Correlate,
    /// Singular spectrum and eigen-observations.
    Spectral,
    /// Fourth moments of the eigen-observables.
    Moments,
    /// Observation energies and Boltzmann probabilities.
    Energy,
    /// Truncated reconstructions across mixing scenarios.
    Dimred,
    /// Iterative training of the latent weights.
    Optimize,
    /// Harmonic-oscillator dynamics in the observables space.
    Oscillate,
    /// Built-in numerical checks on synthetic data.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Gram => "gram",
            Command::Project => "project",
            Command::Correlate => "correlate",
            Command::Spectral => "spectral",
            Command::Moments => "moments",
            Command::Energy => "energy",
            Command::Dimred => "dimred",
            Command::Optimize => "optimize",
            Command::Oscillate => "oscillate",
            Command::Selftest => "selftest",
        }
    }
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn domain(e: &Error) -> ExitCode {
    eprintln!("error: {}: {e}", e.name());
    ExitCode::from(1)
}

fn run(command: Command, s: &Settings, report: &mut Report) -> trainspace::Result<bool> {
    match command {
        Command::Ingest => commands::ingest(s, report)?,
        Command::Gram => commands::gram(s, report)?,
        Command::Project => commands::project(s, report)?,
        Command::Correlate => commands::correlate(s, report)?,
        Command::Spectral => commands::spectral(s, report)?,
        Command::Moments => commands::moments(s, report)?,
        Command::Energy => commands::energy(s, report)?,
        Command::Dimred => commands::dimred(s, report)?,
        Command::Optimize => commands::optimize(s, report)?,
        Command::Oscillate => commands::oscillate(s, report)?,
        Command::Selftest => return commands::selftest(s, Some(report)),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let mut s = cli.settings;
    if let Some(path) = s.config.clone() {
        if let Err(msg) = s.merge_config(&path) {
            return usage(&msg);
        }
    }
    let Some(out) = s.out.clone() else {
        if cli.command == Command::Selftest {
            return match commands::selftest(&s, None) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err(e) => domain(&e),
            };
        }
        return usage("--out is required");
    };
    if cli.command != Command::Selftest && s.input.is_none() {
        return usage("--input is required");
    }
    let mut report = match Report::create(&out, cli.command.name()) {
        Ok(r) => r,
        Err(e) => return domain(&e),
    };
    match run(cli.command, &s, &mut report) {
        Ok(passed) => match report.finish(s.seed(), &s) {
            Ok(dir) => {
                eprintln!("wrote {}", dir.display());
                if passed {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => domain(&e),
        },
        Err(e) => domain(&e),
    }
}
