//! `disagg`: temporal-disaggregation pipeline driver.
//!
//! - Subcommands run a fixed stage sequence and write artifacts plus a
//!   `manifest.json` under the configured output directory.
//! - Exit codes: 0 success, 1 invalid input, 2 runtime failure.
//! - `DISAGG_THREADS` caps the worker pool used for evaluation cells.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use disagg_cli::config::{load_config, Overrides};
use disagg_cli::pipeline::{run, stages_for, Action};
use disagg_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "disagg", version, about = "Distributes quarterly GDP across months")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true, default_value = "config.toml")]
    config: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory (relative to the config file).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Overrides the country label.
    #[arg(long, global = true)]
    country: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Loads the master file, applies transforms, aggregates to quarters.
    Preprocess,
    /// Expanding-window backtest of every configured model and lag depth.
    Evaluate,
    /// Pairwise forecast-accuracy tests between models at each lag depth.
    Dm,
    /// Refits the best model and distributes quarterly growth across months.
    Disaggregate,
    /// Per-feature attributions of the final model's predictions.
    Explain,
    /// Simulation checks of the regime-bias and ridge-risk results.
    Theory,
    /// Every stage in order.
    All,
}

impl Command {
    fn action(self) -> Action {
        match self {
            Command::Preprocess => Action::Preprocess,
            Command::Evaluate => Action::Evaluate,
            Command::Dm => Action::Dm,
            Command::Disaggregate => Action::Disaggregate,
            Command::Explain => Action::Explain,
            Command::Theory => Action::Theory,
            Command::All => Action::All,
        }
    }
}

/// Applies the `DISAGG_THREADS` cap before any parallel work starts.
fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("DISAGG_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().map_err(|_| {
        CliError::Validation(format!("DISAGG_THREADS must be a positive integer, got {raw:?}"))
    })?;
    if threads == 0 {
        return Err(CliError::Validation(
            "DISAGG_THREADS must be a positive integer, got 0".to_string(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("cannot size the worker pool: {e}")))
}

fn execute(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out.clone(),
        country: cli.country.clone(),
    };
    let config = load_config(&cli.config, &overrides)?;
    let manifest = run(&config, &stages_for(cli.command.action()))?;
    println!(
        "completed stages: {}",
        manifest.completed_stages.join(", ")
    );
    println!(
        "manifest: {}",
        config.out_path().join("manifest.json").display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    // usage errors share exit code 1 with other invalid input; help and
    // version remain successful exits
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
