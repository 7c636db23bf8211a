use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use planewave::scenario::{parse_scenario, preset, Scenario};
use planewave::{commands, CliError};

/// Stochastic plane-wave channel synthesis.
#[derive(Debug, Parser)]
#[command(name = "planewave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw channel realizations and write them as CSV and complex64 blobs.
    Synthesize(Common),
    /// Estimate the spatial autocorrelation of a scenario.
    Acf(Common),
    /// Run the validation checks; exit 1 if any fails.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Run a single check.
        #[arg(long)]
        only: Option<String>,
    },
    /// Export p(θ, φ)·sinθ on a hemisphere grid.
    Angular(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: isotropic, fig8b or fig8c.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<Scenario, CliError> {
        let mut sc = match (&self.scenario, &self.preset) {
            (Some(p), _) => parse_scenario(p)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => unreachable!("clap requires one of --scenario/--preset"),
        };
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(CliError::Scenario("--threads must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Scenario(format!("thread pool: {e}")))?;
        }
        Ok(sc)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synthesize(c) => commands::synthesize(&c.load()?, &c.out),
        Command::Acf(c) => commands::acf(&c.load()?, &c.out),
        Command::Validate { common, only } => commands::validate(&common.load()?, &common.out, only.as_deref()),
        Command::Angular(c) => commands::angular(&c.load()?, &c.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
