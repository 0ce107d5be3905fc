//! Command-line driver: ingest data, emit the correlation heatmap, run the
//! horizon sweep, trace one country, and summarize results.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{RunConfig, Settings};
pub use error::{CliError, EXIT_DATA, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "epiforecast", version, about = "Horizon-sweep forecasting of epidemic active cases")]
pub struct Cli {
    /// TOML file with flat configuration keys; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Merge the series and static CSVs into a panel.
    Ingest,
    /// Pairwise correlation matrix of the features.
    Heatmap,
    /// Cross-validate every (model, method, horizon) cell.
    Sweep,
    /// Sliding-window forecasts for one country.
    Trace,
    /// Consolidate sweep results into summaries.
    Report,
}

fn execute(command: Command, cfg: &RunConfig) -> Result<String, CliError> {
    Ok(match command {
        Command::Ingest => {
            let (panel, report) = commands::cmd_ingest(cfg)?;
            format!(
                "ingested {} countries over {} days into {} (report {})",
                panel.countries.len(),
                panel.len_days(),
                cfg.panel.display(),
                report.display()
            )
        }
        Command::Heatmap => format!("wrote {}", commands::cmd_heatmap(cfg)?.display()),
        Command::Sweep => {
            let result = commands::cmd_sweep(cfg)?;
            let failed = result.cells.iter().filter(|c| !c.report.valid).count();
            format!("{} cells under {} ({failed} invalid)", result.cells.len(), cfg.out.join("sweep").display())
        }
        Command::Trace => format!("wrote {}", commands::cmd_trace(cfg)?.display()),
        Command::Report => {
            let (path, n) = commands::cmd_report(cfg)?;
            format!("summarized {n} cells in {}", path.display())
        }
    })
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = RunConfig::load(cli.config.as_deref(), cli.settings).and_then(|cfg| execute(cli.command, &cfg));
    match outcome {
        Ok(msg) => {
            println!("{msg}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
