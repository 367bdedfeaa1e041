use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use djwave_cli::config::{parse_grid, GridConfig, RunConfig};
use djwave_cli::run::{cmd_analyze, cmd_report, cmd_solve, cmd_sweep, CliError, EXIT_INPUT};

const DEFAULT_OUT: &str = "djwave-out";

/// Steady periodic water waves: solve, analyze, sweep and report.
#[derive(Parser, Debug)]
#[command(name = "djwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration (required by solve and sweep).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Also write SVG plots.
    #[arg(long, global = true)]
    plots: bool,

    /// Grid size, e.g. 65x33; overrides `[grid]`.
    #[arg(long, global = true, value_name = "NQxNP", value_parser = parse_grid)]
    grid: Option<GridConfig>,

    /// Newton residual tolerance; overrides `[tolerances] newton`.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Continue a wave from the laminar flow to the target amplitude.
    Solve,
    /// Run every check on a height-field file or on all members of a solve directory.
    Analyze {
        /// Height-field JSON or a directory holding trace.json.
        input: PathBuf,
    },
    /// Solve and analyze every vorticity x amplitude cell of the `[sweep]` table.
    Sweep,
    /// Print the verdict table of an analysis report.
    Report {
        /// Analysis report JSON.
        input: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::input("--config PATH is required"))?;
    RunConfig::load(path)
        .and_then(|c| c.with_overrides(cli.grid, cli.tol))
        .map_err(|e| CliError::input(e.to_string()))
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| Path::new(DEFAULT_OUT).to_path_buf())
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Solve => {
            let cfg = load_config(cli)?;
            cmd_solve(&cfg, &out_dir(cli, Some(&cfg)), cli.plots || cfg.output.plots)
        }
        Command::Sweep => {
            let cfg = load_config(cli)?;
            cmd_sweep(&cfg, &out_dir(cli, Some(&cfg)), cli.plots || cfg.output.plots)
        }
        Command::Analyze { input } => cmd_analyze(input, cli.out.as_deref(), cli.plots),
        Command::Report { input } => cmd_report(input, cli.out.as_deref(), cli.plots),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version are successful exits; usage errors share the input code
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
