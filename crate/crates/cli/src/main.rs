use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heatlayer::oracle::Oracle;
use heatlayer_cli::{
    format_eval, load_config, outcome, presets, run, write_csv, CliError, ConvergenceRecord, RunOptions, Study,
};

/// Layer heat potentials on moving planar boundaries.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads (output does not depend on this)
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Exit with status 4 when a spatial integral was not resolved
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the potential for every method and time step of a config
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Override a config value, e.g. `--set time.dt=0.04`
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
        /// Also compute the reference value and the error
        #[arg(long)]
        oracle: bool,
    },
    /// Reproduce one of the figure sweeps as CSV
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append a wall-time column (makes the output nondeterministic)
        #[arg(long)]
        timing: bool,
    },
    /// Error-versus-order study from a config or a built-in preset
    Convergence {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// model-graded, model-dyadic or stiffness
        #[arg(long)]
        preset: Option<String>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
}

fn emit(rows: &[ConvergenceRecord], out: Option<PathBuf>, timing: bool) -> Result<(), CliError> {
    match out {
        Some(path) => write_csv(BufWriter::new(File::create(path)?), rows, timing),
        None => write_csv(io::stdout().lock(), rows, timing),
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let opts = |oracle: bool| RunOptions {
        jobs: cli.jobs,
        oracle: oracle.then(Oracle::default),
    };
    let rows = match cli.command {
        Command::Eval {
            config,
            overrides,
            oracle,
        } => {
            let config = load_config(&config, &overrides)?;
            let rows = run(&Study::Potentials(config), &opts(oracle))?;
            for row in &rows {
                println!("{}", format_eval(row, oracle));
            }
            rows
        }
        Command::Figure { which, out, timing } => {
            let config = presets::figure(which).ok_or(CliError::UnknownFigure(which))?;
            let rows = run(&Study::Potentials(config), &opts(true))?;
            emit(&rows, out, timing)?;
            rows
        }
        Command::Convergence {
            config,
            preset,
            overrides,
            out,
            timing,
        } => {
            let (study, default_out) = match (config, preset) {
                (Some(path), _) => {
                    let config = load_config(&path, &overrides)?;
                    let out = config.output.clone();
                    (Study::Potentials(config), out)
                }
                (None, Some(name)) => (presets::convergence(&name).ok_or(CliError::UnknownPreset(name))?, None),
                (None, None) => return Err(CliError::NoStudy),
            };
            let rows = run(&study, &opts(true))?;
            emit(&rows, out.or(default_out), timing)?;
            rows
        }
    };
    Ok(outcome(&rows, cli.strict))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
