//! The `formatsel` command line: size estimates, format decisions for
//! workflows, validation against reference writers, and projection
//! crossover sweeps.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use formatsel_core::layout::DataStats;

pub mod catalog;
pub mod choose;
pub mod config;
pub mod crossover;
pub mod error;
pub mod estimate;
pub mod render;
pub mod validate;

pub use config::{OutputFormat, Overrides, RunConfig};
pub use error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "formatsel", version, about = "Cost-based storage format selection for intermediate results")]
pub struct Cli {
    /// Configuration document (TOML, or JSON by extension). Defaults to
    /// the file named by FORMATSEL_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// text, json or csv.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<String>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimated on-disk size of a table in one format.
    EstimateSize(estimate::EstimateArgs),
    /// Pick a storage format for every materialized node of a workflow.
    Choose(choose::ChooseArgs),
    /// Check the estimates against reference writers and simulators.
    Validate(validate::ValidateArgs),
    /// Projection cost of a row and a hybrid layout as more columns are read.
    Crossover(crossover::CrossoverArgs),
    /// Statistics catalog maintenance.
    #[command(subcommand)]
    Catalog(catalog::CatalogCommand),
}

/// Table statistics from a JSON file or from flags.
#[derive(Debug, Clone, Default, Args)]
pub struct StatsArgs {
    /// JSON file holding row_count, avg_row_size, avg_col_size, col_count
    /// and optionally varlen_col_count.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["rows", "cols", "col_size", "row_size", "varlen_cols"])]
    pub stats: Option<PathBuf>,

    #[arg(long)]
    pub rows: Option<u64>,

    #[arg(long)]
    pub cols: Option<u32>,

    /// Average payload bytes per value.
    #[arg(long)]
    pub col_size: Option<f64>,

    /// Average payload bytes per row. Defaults to cols times col-size.
    #[arg(long)]
    pub row_size: Option<f64>,

    /// How many of the columns have variable length.
    #[arg(long)]
    pub varlen_cols: Option<u32>,
}

impl StatsArgs {
    /// `None` when neither a file nor any flag was given.
    pub fn resolve(&self) -> Result<Option<DataStats>, CliError> {
        let stats = if let Some(path) = &self.stats {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<DataStats>(&text)
                .map_err(|e| CliError::input(format!("stats {}: {e}", path.display())))?
        } else {
            let any = self.rows.is_some()
                || self.cols.is_some()
                || self.col_size.is_some()
                || self.row_size.is_some()
                || self.varlen_cols.is_some();
            if !any {
                return Ok(None);
            }
            let (Some(rows), Some(cols), Some(col_size)) = (self.rows, self.cols, self.col_size) else {
                return Err(CliError::input("statistics need --rows, --cols and --col-size"));
            };
            let mut s = DataStats::new(rows, col_size, cols).with_varlen(self.varlen_cols.unwrap_or(0));
            if let Some(r) = self.row_size {
                s.avg_row_size = r;
            }
            s
        };
        stats.validate()?;
        Ok(Some(stats))
    }
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            output: self.output.clone(),
            seed: self.seed,
            ..Overrides::default()
        }
    }
}

/// Runs one command, writing its report to `out`. Returns the exit code for
/// a completed run; errors carry their own.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut flags = cli.overrides();
    match &cli.command {
        Command::EstimateSize(a) => {
            let cfg = RunConfig::resolve(cli.config.as_deref(), &flags)?;
            estimate::run(a, &cfg, out)
        }
        Command::Choose(a) => {
            a.apply(&mut flags);
            let cfg = RunConfig::resolve(cli.config.as_deref(), &flags)?;
            choose::run(a, &cfg, out)
        }
        Command::Validate(a) => {
            let cfg = RunConfig::resolve(cli.config.as_deref(), &flags)?;
            validate::run(a, &cfg, out)
        }
        Command::Crossover(a) => {
            let cfg = RunConfig::resolve(cli.config.as_deref(), &flags)?;
            crossover::run(a, &cfg, out)
        }
        Command::Catalog(c) => {
            let cfg = RunConfig::resolve(cli.config.as_deref(), &flags)?;
            catalog::run(c, &cfg, out)
        }
    }
}

/// Parses `args` (program name first) and runs. Errors are reported on
/// `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{}", e.render());
            return exit::INPUT_ERROR;
        }
        Err(e) => {
            let _ = write!(out, "{}", e.render());
            return exit::SUCCESS;
        }
    };
    match run(cli, out) {
        Ok(code) => code,
        Err(e) if e.is_silent() => e.code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}
