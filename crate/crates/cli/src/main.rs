use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac_mi_cli::{cmd_curves, cmd_region, cmd_slopes, cmd_validate, configure_threads, CliResult, ModeArg};

/// Communication and sensing rate regions for ISAC and FDSAC systems.
#[derive(Parser)]
#[command(name = "isac-mi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ergodic rate regions, one CSV per mode.
    Region {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
    },
    /// Rates against transmit power over the configured sweep.
    Curves {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// High-SNR slopes, numeric and analytic.
    Slopes {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Runs the built-in oracle checks.
    Validate,
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let outputs = match cli.command {
        Command::Region { config, out, mode } => cmd_region(&config, mode, &out)?,
        Command::Curves { config, out } => cmd_curves(&config, &out)?,
        Command::Slopes { config, out } => cmd_slopes(&config, &out)?,
        Command::Validate => return cmd_validate(),
    };
    for p in outputs {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("isac-mi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
