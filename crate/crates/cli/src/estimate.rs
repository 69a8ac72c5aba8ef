use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use formatsel_core::formats::{FormatDescriptor, FormatName};
use formatsel_core::layout::{DataStats, SizeBreakdown};
use formatsel_core::oracle::{self, ColumnSpec, ReferenceFile, SyntheticTable};

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;
use crate::render::{self, opt6, sig6, Table};
use crate::StatsArgs;

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// seqfile, avro, parquet or vertical.
    #[arg(long)]
    pub format: String,

    #[command(flatten)]
    pub stats: StatsArgs,

    /// Also write a synthetic table with these statistics through the
    /// reference writer and compare. The estimate is then recomputed from
    /// the statistics of the generated rows.
    #[arg(long)]
    pub oracle: bool,

    /// Keep the reference writer's bytes under this directory. Implies
    /// --oracle.
    #[arg(long, value_name = "DIR")]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeReport {
    pub format: FormatName,
    pub stats: DataStats,
    pub estimated: SizeBreakdown,
    pub oracle: Option<OracleComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub seed: u64,
    pub measured_stats: DataStats,
    /// Estimate from `measured_stats`.
    pub estimated: SizeBreakdown,
    pub reference: SizeBreakdown,
    /// Signed error of the total, percent of the reference.
    pub error_pct: f64,
    pub sync_markers: u64,
    pub blocks: u64,
    pub pages: u64,
    pub row_groups: usize,
}

#[derive(Debug, Serialize)]
struct SectionRow {
    section: &'static str,
    estimated: f64,
    measured_estimate: Option<f64>,
    reference: Option<f64>,
    error_pct: Option<f64>,
}

/// Signed percent error; `None` when the reference is empty and the
/// estimate is not.
pub fn pct_error(estimated: f64, reference: f64) -> Option<f64> {
    if reference == 0.0 {
        (estimated == 0.0).then_some(0.0)
    } else {
        Some((estimated - reference) / reference * 100.0)
    }
}

/// Synthetic table matching `stats`: the first `varlen_col_count` columns
/// vary in length, all share the average width.
pub fn synthetic_table(stats: &DataStats, seed: u64) -> Result<SyntheticTable, CliError> {
    let w = stats.avg_col_size;
    if (w - w.round()).abs() > 1e-9 || w.round() < 1.0 || w > f64::from(u32::MAX) {
        return Err(CliError::input(format!(
            "the reference writer needs a whole column width, got {w}"
        )));
    }
    let expected_row = w * f64::from(stats.col_count);
    if (stats.avg_row_size - expected_row).abs() > 1e-9 * expected_row.max(1.0) {
        return Err(CliError::input(format!(
            "the reference writer needs avg_row_size = col_count x avg_col_size ({expected_row}), got {}",
            stats.avg_row_size
        )));
    }
    let width = w.round() as u32;
    let columns = (0..stats.col_count)
        .map(|i| {
            if i < stats.varlen_col_count {
                ColumnSpec::varlen(width)
            } else {
                ColumnSpec::fixed(width)
            }
        })
        .collect();
    Ok(SyntheticTable::new(stats.row_count, columns, seed))
}

pub fn estimate(
    fd: &FormatDescriptor,
    stats: &DataStats,
    with_oracle: bool,
    dump: Option<&std::path::Path>,
    seed: u64,
) -> Result<SizeReport, CliError> {
    let estimated = fd.sections(stats)?;
    let oracle = if with_oracle || dump.is_some() {
        let table = synthetic_table(stats, seed)?;
        let measured = oracle::measured_stats(&table)?;
        let file: ReferenceFile = match dump {
            Some(dir) => oracle::dump_reference_file(&table, fd, dir)?,
            None => oracle::write_reference_file(&table, fd)?,
        };
        let est = fd.sections(&measured)?;
        let reference = file.sections();
        Some(OracleComparison {
            seed,
            measured_stats: measured,
            estimated: est,
            reference,
            error_pct: pct_error(est.total, reference.total).unwrap_or(f64::INFINITY),
            sync_markers: file.sync_markers,
            blocks: file.blocks,
            pages: file.pages,
            row_groups: file.row_groups.len(),
        })
    } else {
        None
    };
    Ok(SizeReport {
        format: fd.name(),
        stats: *stats,
        estimated,
        oracle,
    })
}

fn section_rows(r: &SizeReport) -> Vec<SectionRow> {
    let pick = |b: &SizeBreakdown, i: usize| [b.header, b.body, b.footer, b.total][i];
    ["header", "body", "footer", "total"]
        .into_iter()
        .enumerate()
        .map(|(i, section)| {
            let o = r.oracle.as_ref();
            let m = o.map(|o| pick(&o.estimated, i));
            let refv = o.map(|o| pick(&o.reference, i));
            SectionRow {
                section,
                estimated: pick(&r.estimated, i),
                measured_estimate: m,
                reference: refv,
                error_pct: m.zip(refv).and_then(|(m, rv)| pct_error(m, rv)),
            }
        })
        .collect()
}

pub fn write_stats_line(out: &mut dyn Write, s: &DataStats) -> std::io::Result<()> {
    writeln!(
        out,
        "rows {}  cols {}  varlen {}  avg_row {}  avg_col {}",
        s.row_count,
        s.col_count,
        s.varlen_col_count,
        sig6(s.avg_row_size),
        sig6(s.avg_col_size)
    )
}

pub fn run(args: &EstimateArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let fd = cfg.descriptor_by_name(&args.format)?;
    let stats = args
        .stats
        .resolve()?
        .ok_or_else(|| CliError::input("estimate-size needs --stats or --rows/--cols/--col-size"))?;
    let report = estimate(&fd, &stats, args.oracle, args.dump.as_deref(), cfg.seed)?;
    match cfg.output {
        OutputFormat::Json => render::json(out, &report)?,
        OutputFormat::Csv => render::csv_rows(out, &section_rows(&report))?,
        OutputFormat::Text => {
            writeln!(out, "format {}", report.format)?;
            write_stats_line(out, &report.stats)?;
            if let Some(o) = &report.oracle {
                write!(out, "measured ")?;
                write_stats_line(out, &o.measured_stats)?;
            }
            let rows = section_rows(&report);
            let mut t = if report.oracle.is_some() {
                Table::new(["section", "estimated", "measured_estimate", "reference", "error_%"])
            } else {
                Table::new(["section", "estimated"])
            };
            for r in &rows {
                let mut cells = vec![r.section.to_string(), sig6(r.estimated)];
                if report.oracle.is_some() {
                    cells.push(opt6(r.measured_estimate));
                    cells.push(opt6(r.reference));
                    cells.push(opt6(r.error_pct));
                }
                t.row(cells);
            }
            t.write(out, "")?;
        }
    }
    Ok(crate::exit::SUCCESS)
}
