use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use formatsel_core::crossover::{crossover, CrossoverReport};
use formatsel_core::fixtures::lineitem_part_stats;

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;
use crate::estimate::write_stats_line;
use crate::render::{self, sig6, Table};
use crate::StatsArgs;

#[derive(Debug, Args)]
pub struct CrossoverArgs {
    /// Table statistics. Defaults to the bundled wide join result.
    #[command(flatten)]
    pub stats: StatsArgs,

    /// Row-oriented format.
    #[arg(long, default_value = "avro")]
    pub horizontal: String,

    /// Row-group format.
    #[arg(long, default_value = "parquet")]
    pub hybrid: String,

    /// Also write the per-width cost curves here.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

pub fn report(args: &CrossoverArgs, cfg: &RunConfig) -> Result<CrossoverReport, CliError> {
    let stats = match args.stats.resolve()? {
        Some(s) => s,
        None => lineitem_part_stats(),
    };
    let horizontal = cfg.descriptor_by_name(&args.horizontal)?;
    let hybrid = cfg.descriptor_by_name(&args.hybrid)?;
    Ok(crossover(&stats, &horizontal, &hybrid, &cfg.system)?)
}

pub fn run(args: &CrossoverArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = report(args, cfg)?;
    if let Some(path) = &args.csv {
        render::csv_file(path, &r.points)?;
    }
    match cfg.output {
        OutputFormat::Json => render::json(out, &r)?,
        OutputFormat::Csv => render::csv_rows(out, &r.points)?,
        OutputFormat::Text => {
            writeln!(out, "horizontal {}  hybrid {}", r.horizontal, r.hybrid)?;
            write_stats_line(out, &r.stats)?;
            match r.crossovers.as_slice() {
                [] => writeln!(out, "crossover none")?,
                xs => {
                    let list: Vec<String> = xs.iter().map(|&x| sig6(x)).collect();
                    writeln!(out, "crossover {}", list.join(" "))?;
                }
            }
            let mut t = Table::new([
                "ref_cols",
                "fraction",
                "hybrid_bytes_fraction",
                "horizontal_cost",
                "hybrid_cost",
                "cheaper",
            ]);
            for p in &r.points {
                let cheaper = if p.hybrid_cost < p.horizontal_cost {
                    r.hybrid
                } else {
                    r.horizontal
                };
                t.row([
                    p.ref_cols.to_string(),
                    sig6(p.fraction),
                    sig6(p.hybrid_bytes_fraction),
                    sig6(p.horizontal_cost),
                    sig6(p.hybrid_cost),
                    cheaper.to_string(),
                ]);
            }
            t.write(out, "")?;
        }
    }
    Ok(crate::exit::SUCCESS)
}
