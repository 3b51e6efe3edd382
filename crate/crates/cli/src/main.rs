use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use savfem::app::{self, Overrides, OUTPUT_DIR_ENV};
use savfem::config::{self, RunConfig};
use savfem::{Error, Result};

/// Exit code for a completed stability run whose energy checks failed.
const EXIT_CHECK_FAILED: u8 = 5;

#[derive(Parser)]
#[command(
    name = "savfem",
    version,
    about = "Energy-stable phase-field solver for photopolymer curing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file, or the name of a shipped preset.
    config: String,
    /// Use the full-resolution grids declared in the configuration.
    #[arg(long)]
    paper_scale: bool,
    /// Output directory; overrides the configuration and the environment.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Time-march a configuration, writing field snapshots and the energy series.
    Simulate(RunArgs),
    /// Spatial and temporal convergence sweeps against the manufactured solution.
    MmsConverge(RunArgs),
    /// Source-free run checking the discrete energy identity.
    Stability(RunArgs),
    /// List presets and describe an optional configuration.
    Info {
        /// Configuration file or preset name.
        config: Option<String>,
    },
}

fn load(name: &str) -> Result<RunConfig> {
    let text = if Path::new(name).is_file() {
        std::fs::read_to_string(name)?
    } else if let Some(text) = config::preset(name) {
        text.to_string()
    } else {
        let names: Vec<&str> = config::PRESETS.iter().map(|(n, _)| *n).collect();
        return Err(Error::InvalidInput(format!(
            "`{name}` is neither a readable file nor a preset ({})",
            names.join(", ")
        )));
    };
    config::parse_config(&text)
}

fn overrides(args: &RunArgs) -> Overrides {
    let output_dir = args.output.clone().or_else(|| {
        std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    });
    Overrides {
        paper_scale: args.paper_scale,
        output_dir,
    }
}

fn execute(command: Command) -> Result<ExitCode> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Simulate(args) => {
            let cfg = load(&args.config)?;
            app::simulate(&cfg, &overrides(&args), &mut out)?;
        }
        Command::MmsConverge(args) => {
            let cfg = load(&args.config)?;
            app::mms_converge(&cfg, &overrides(&args), &mut out)?;
        }
        Command::Stability(args) => {
            let cfg = load(&args.config)?;
            let (_, passed) = app::stability(&cfg, &overrides(&args), &mut out)?;
            if !passed {
                return Ok(ExitCode::from(EXIT_CHECK_FAILED));
            }
        }
        Command::Info { config } => {
            let cfg = config.as_deref().map(load).transpose()?;
            app::info(cfg.as_ref(), &mut out)?;
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
