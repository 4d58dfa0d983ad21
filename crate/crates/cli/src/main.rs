use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qfsc_cli::commands::{cmd_check, cmd_expect, cmd_martingale, cmd_modular, cmd_sweep, CliError, Dimension, Output};
use qfsc_cli::config::Config;

#[derive(Parser)]
#[command(name = "qfsc", version, about = "Quasifree stochastic calculus checks on truncated Fock spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file (report, matrices or CSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepDimension {
    Bins,
    Cutoff,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full invariant suite and write a JSON report.
    Check(Common),
    /// Print one-particle modular data.
    Modular(Common),
    /// Vacuum expectation of a Weyl word.
    Expect {
        #[command(flatten)]
        common: Common,
        /// Word text, e.g. "2i * W(f) + W(g)*".
        #[arg(long)]
        word: String,
    },
    /// Martingale representation round trip and residual table.
    Martingale(Common),
    /// Refinement study as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        dimension: SweepDimension,
        /// Comma-separated values; empty for a header-only CSV.
        #[arg(long, default_value = "")]
        values: String,
    },
}

fn parse_values(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("invalid sweep value `{s}`"))))
        .collect()
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QFSC_THREADS") else { return Ok(()) };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("QFSC_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<Output, CliError> {
    configure_threads()?;
    let load = |c: &Common| -> Result<(Config, u64), CliError> {
        let cfg = Config::from_path(&c.config)?;
        let seed = c.seed.unwrap_or(cfg.run.seed);
        Ok((cfg, seed))
    };
    match &cli.command {
        Command::Check(c) => {
            let (cfg, seed) = load(c)?;
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("report.json"));
            cmd_check(&cfg, seed, &out)
        }
        Command::Modular(c) => {
            let (cfg, _) = load(c)?;
            cmd_modular(&cfg, c.out.as_deref())
        }
        Command::Expect { common, word } => {
            let (cfg, _) = load(common)?;
            cmd_expect(&cfg, word, common.out.as_deref())
        }
        Command::Martingale(c) => {
            let (cfg, seed) = load(c)?;
            cmd_martingale(&cfg, seed, c.out.as_deref())
        }
        Command::Sweep { common, dimension, values } => {
            let (cfg, seed) = load(common)?;
            let dim = match dimension {
                SweepDimension::Bins => Dimension::Bins,
                SweepDimension::Cutoff => Dimension::Cutoff,
            };
            cmd_sweep(&cfg, seed, dim, &parse_values(values)?, common.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
