use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use clap::Subcommand;
use serde::Serialize;

use formatsel_core::layout::DataStats;
use formatsel_core::selector::describe_op;
use formatsel_core::workflow::StatsCatalog;

use crate::choose::{load_catalog, load_workflow};
use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;
use crate::render::{self, sig6, Table};

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    /// Record the statistics a workflow document states into a catalog,
    /// creating the catalog if needed.
    Save {
        #[arg(long, value_name = "FILE")]
        workflow: PathBuf,
        #[arg(long, value_name = "FILE")]
        catalog: PathBuf,
    },
    /// Load a catalog and check every entry.
    Load {
        #[arg(long, value_name = "FILE")]
        catalog: PathBuf,
    },
    /// Show catalog entries, optionally one by fingerprint or by node.
    Inspect {
        #[arg(long, value_name = "FILE")]
        catalog: PathBuf,
        #[arg(long, conflicts_with = "node")]
        fingerprint: Option<String>,
        /// Node id; needs --workflow to compute its fingerprint.
        #[arg(long, requires = "workflow")]
        node: Option<String>,
        /// Label entries with the ids of this workflow's nodes.
        #[arg(long, value_name = "FILE")]
        workflow: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogSummary {
    pub schema_version: u32,
    pub version: u64,
    pub entries: usize,
    pub complete: usize,
    /// Entries written by `save`.
    pub recorded: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryReport {
    pub fingerprint: String,
    pub node: Option<String>,
    pub complete: bool,
    pub data: Option<DataStats>,
    pub operations: Vec<String>,
}

#[derive(Debug, Serialize)]
struct EntryRow<'a> {
    fingerprint: &'a str,
    node: Option<&'a str>,
    complete: bool,
    row_count: Option<u64>,
    avg_row_size: Option<f64>,
    avg_col_size: Option<f64>,
    col_count: Option<u32>,
    varlen_col_count: Option<u32>,
    operations: String,
}

fn summary(c: &StatsCatalog, recorded: Option<usize>) -> CatalogSummary {
    CatalogSummary {
        schema_version: c.schema_version,
        version: c.version,
        entries: c.len(),
        complete: c.entries.values().filter(|s| s.is_complete()).count(),
        recorded,
    }
}

fn check(c: &StatsCatalog) -> Result<(), CliError> {
    for (fp, s) in &c.entries {
        s.validate()
            .map_err(|e| CliError::input(format!("catalog entry {fp}: {e}")))?;
    }
    Ok(())
}

fn write_summary(out: &mut dyn Write, s: &CatalogSummary, fmt: OutputFormat) -> Result<(), CliError> {
    match fmt {
        OutputFormat::Json => render::json(out, s)?,
        OutputFormat::Csv => render::csv_rows(out, std::slice::from_ref(s))?,
        OutputFormat::Text => {
            writeln!(
                out,
                "schema_version {}  version {}  entries {}  complete {}",
                s.schema_version, s.version, s.entries, s.complete
            )?;
            if let Some(n) = s.recorded {
                writeln!(out, "recorded {n}")?;
            }
        }
    }
    Ok(())
}

pub fn run(cmd: &CatalogCommand, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        CatalogCommand::Save { workflow, catalog } => {
            let wf = load_workflow(workflow)?;
            let mut c = load_catalog(catalog, true)?;
            let n = wf.record_into(&mut c)?;
            c.save(catalog)?;
            write_summary(out, &summary(&c, Some(n)), cfg.output)?;
        }
        CatalogCommand::Load { catalog } => {
            let c = load_catalog(catalog, false)?;
            check(&c)?;
            write_summary(out, &summary(&c, None), cfg.output)?;
        }
        CatalogCommand::Inspect {
            catalog,
            fingerprint,
            node,
            workflow,
        } => {
            let c = load_catalog(catalog, false)?;
            let labels: HashMap<String, String> = match workflow {
                Some(p) => load_workflow(p)?
                    .fingerprints()
                    .into_iter()
                    .map(|(id, fp)| (fp, id))
                    .collect(),
                None => HashMap::new(),
            };
            let wanted = match (fingerprint, node) {
                (Some(fp), _) => Some(fp.clone()),
                (None, Some(id)) => Some(
                    labels
                        .iter()
                        .find(|(_, n)| *n == id)
                        .map(|(fp, _)| fp.clone())
                        .ok_or_else(|| CliError::unknown(format!("unknown node `{id}`")))?,
                ),
                (None, None) => None,
            };
            let entries: Vec<EntryReport> = c
                .entries
                .iter()
                .filter(|(fp, _)| wanted.as_ref().is_none_or(|w| fp.starts_with(w.as_str())))
                .map(|(fp, s)| EntryReport {
                    fingerprint: fp.clone(),
                    node: labels.get(fp).cloned(),
                    complete: s.is_complete(),
                    data: s.data,
                    operations: s.operations.iter().map(describe_op).collect(),
                })
                .collect();
            if let Some(w) = &wanted {
                if entries.is_empty() {
                    return Err(CliError::unknown(format!("no catalog entry for `{w}`")));
                }
            }
            write_entries(out, &entries, cfg.output)?;
        }
    }
    Ok(crate::exit::SUCCESS)
}

fn write_entries(out: &mut dyn Write, entries: &[EntryReport], fmt: OutputFormat) -> Result<(), CliError> {
    match fmt {
        OutputFormat::Json => render::json(out, &entries)?,
        OutputFormat::Csv => {
            let rows: Vec<EntryRow> = entries
                .iter()
                .map(|e| EntryRow {
                    fingerprint: &e.fingerprint,
                    node: e.node.as_deref(),
                    complete: e.complete,
                    row_count: e.data.map(|d| d.row_count),
                    avg_row_size: e.data.map(|d| d.avg_row_size),
                    avg_col_size: e.data.map(|d| d.avg_col_size),
                    col_count: e.data.map(|d| d.col_count),
                    varlen_col_count: e.data.map(|d| d.varlen_col_count),
                    operations: e.operations.join(" "),
                })
                .collect();
            render::csv_rows(out, &rows)?;
        }
        OutputFormat::Text => {
            let mut t = Table::new([
                "fingerprint", "node", "complete", "rows", "cols", "varlen", "avg_row", "operations",
            ]);
            for e in entries {
                let d = e.data;
                t.row([
                    e.fingerprint.chars().take(12).collect::<String>(),
                    e.node.clone().unwrap_or_else(|| "-".into()),
                    e.complete.to_string(),
                    d.map_or("-".into(), |d| d.row_count.to_string()),
                    d.map_or("-".into(), |d| d.col_count.to_string()),
                    d.map_or("-".into(), |d| d.varlen_col_count.to_string()),
                    d.map_or("-".into(), |d| sig6(d.avg_row_size)),
                    e.operations.join(" "),
                ]);
            }
            t.write(out, "")?;
        }
    }
    Ok(())
}
