use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use formatsel_core::formats::FormatName;
use formatsel_core::selector::{
    choose_for_workflow, describe_op, explain, DecisionPath, DecisionPolicy, FormatReport,
};
use formatsel_core::workflow::{parse_workflow, SelectionMode, SelectionOptions, StatsCatalog, Workflow};

use crate::config::{OutputFormat, Overrides, RunConfig};
use crate::error::CliError;
use crate::render::{self, opt6, sig6, Table};

#[derive(Debug, Args)]
pub struct ChooseArgs {
    /// Workflow document (JSON).
    #[arg(long, value_name = "FILE")]
    pub workflow: PathBuf,

    /// Statistics catalog (JSON). Nodes without an entry fall back to the
    /// statistics stated in the workflow, then to rules.
    #[arg(long, value_name = "FILE")]
    pub catalog: Option<PathBuf>,

    /// After deciding, record the statistics stated in the workflow into
    /// the catalog file, creating it if needed.
    #[arg(long, requires = "catalog")]
    pub record: bool,

    /// Comma-separated candidate formats.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<String>>,

    /// rule, cost or auto.
    #[arg(long)]
    pub mode: Option<String>,

    /// Which nodes to materialize: conservative, aggressive or both.
    #[arg(long)]
    pub restore: Option<String>,

    /// Expected reads per write.
    #[arg(long)]
    pub amortization_reads: Option<f64>,

    /// Let a STORE consumer alone make a node eligible.
    #[arg(long)]
    pub count_store_consumers: bool,
}

impl ChooseArgs {
    pub fn apply(&self, flags: &mut Overrides) {
        flags.candidates = self.candidates.clone();
        flags.mode = self.mode.clone();
        flags.restore = self.restore.clone();
        flags.amortization_reads = self.amortization_reads;
        flags.count_store_consumers = self.count_store_consumers;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionEntry {
    pub node: String,
    pub kind: String,
    pub fingerprint: String,
    pub format: FormatName,
    pub decided_by: DecisionPath,
    pub total_cost: Option<f64>,
    pub operations: Vec<String>,
    /// Rank order, cheapest first. Empty for rule decisions.
    pub candidates: Vec<FormatReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChooseReport {
    pub mode: DecisionPolicy,
    pub restore: SelectionMode,
    pub candidates: Vec<FormatName>,
    pub amortization_reads: f64,
    pub decisions: Vec<DecisionEntry>,
    /// Entries written by --record.
    pub recorded: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct CsvRow<'a> {
    node: &'a str,
    kind: &'a str,
    chosen: FormatName,
    decided_by: DecisionPath,
    candidate: Option<FormatName>,
    item: Option<&'a str>,
    bytes: Option<f64>,
    chunks: Option<f64>,
    seeks: Option<u64>,
    cost: Option<f64>,
    frequency: Option<f64>,
    contribution: Option<f64>,
}

pub fn load_workflow(path: &Path) -> Result<Workflow, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read workflow {}: {e}", path.display())))?;
    Ok(parse_workflow(&text)?)
}

pub fn load_catalog(path: &Path, create: bool) -> Result<StatsCatalog, CliError> {
    if create && !path.exists() {
        return Ok(StatsCatalog::new());
    }
    Ok(StatsCatalog::load(path)?)
}

pub fn decide(wf: &Workflow, catalog: Option<&StatsCatalog>, cfg: &RunConfig) -> Result<Vec<DecisionEntry>, CliError> {
    let selection = SelectionOptions {
        mode: cfg.restore,
        count_store_consumers: cfg.count_store_consumers,
    };
    let decisions = choose_for_workflow(wf, catalog, selection, &cfg.selector_config())?;
    Ok(decisions
        .into_iter()
        .map(|d| DecisionEntry {
            candidates: explain(&d.choice).candidates,
            node: d.node,
            kind: d.kind,
            fingerprint: d.fingerprint,
            format: d.choice.format,
            decided_by: d.choice.decided_by,
            total_cost: d.choice.total_cost,
            operations: d.operations.iter().map(describe_op).collect(),
        })
        .collect())
}

pub fn run(args: &ChooseArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let wf = load_workflow(&args.workflow)?;
    let mut catalog = match &args.catalog {
        Some(p) => Some(load_catalog(p, args.record)?),
        None => None,
    };
    let decisions = decide(&wf, catalog.as_ref(), cfg)?;
    let recorded = match (&mut catalog, &args.catalog) {
        (Some(c), Some(path)) if args.record => {
            let n = wf.record_into(c)?;
            c.save(path)?;
            Some(n)
        }
        _ => None,
    };
    let report = ChooseReport {
        mode: cfg.mode,
        restore: cfg.restore,
        candidates: cfg.candidates.clone(),
        amortization_reads: cfg.amortization_reads,
        decisions,
        recorded,
    };
    match cfg.output {
        OutputFormat::Json => render::json(out, &report)?,
        OutputFormat::Csv => render::csv_rows(out, &csv_rows(&report))?,
        OutputFormat::Text => write_text(out, &report)?,
    }
    Ok(crate::exit::SUCCESS)
}

fn csv_rows(report: &ChooseReport) -> Vec<CsvRow<'_>> {
    let mut rows = Vec::new();
    for d in &report.decisions {
        let base = CsvRow {
            node: &d.node,
            kind: &d.kind,
            chosen: d.format,
            decided_by: d.decided_by,
            candidate: None,
            item: None,
            bytes: None,
            chunks: None,
            seeks: None,
            cost: None,
            frequency: None,
            contribution: None,
        };
        if d.candidates.is_empty() {
            rows.push(base);
            continue;
        }
        for c in &d.candidates {
            for r in &c.rows {
                rows.push(CsvRow {
                    candidate: Some(c.format),
                    item: Some(&r.item),
                    bytes: Some(r.bytes),
                    chunks: Some(r.chunks),
                    seeks: Some(r.seeks),
                    cost: Some(r.cost),
                    frequency: Some(r.frequency),
                    contribution: Some(r.contribution),
                    ..base
                });
            }
            rows.push(CsvRow {
                candidate: Some(c.format),
                item: Some("total"),
                bytes: Some(c.sections.total),
                contribution: Some(c.total_cost),
                ..base
            });
        }
    }
    rows
}

fn write_text(out: &mut dyn Write, report: &ChooseReport) -> Result<(), CliError> {
    let names: Vec<&str> = report.candidates.iter().map(|n| n.as_str()).collect();
    writeln!(
        out,
        "mode {}  restore {}  candidates {}  amortization_reads {}",
        report.mode,
        format!("{:?}", report.restore).to_lowercase(),
        names.join(","),
        sig6(report.amortization_reads)
    )?;
    let mut t = Table::new(["node", "kind", "format", "decided_by", "total_cost", "operations"]);
    for d in &report.decisions {
        t.row([
            d.node.clone(),
            d.kind.clone(),
            d.format.to_string(),
            d.decided_by.to_string(),
            opt6(d.total_cost),
            d.operations.join(" "),
        ]);
    }
    t.write(out, "")?;
    for d in report.decisions.iter().filter(|d| !d.candidates.is_empty()) {
        writeln!(out)?;
        writeln!(out, "{} cost breakdown", d.node)?;
        let items: Vec<String> = d.candidates[0].rows.iter().map(|r| r.item.clone()).collect();
        let mut t = Table::new(
            ["format".to_string(), "size".to_string(), "total".to_string()]
                .into_iter()
                .chain(items),
        );
        for c in &d.candidates {
            t.row(
                [c.format.to_string(), sig6(c.sections.total), sig6(c.total_cost)]
                    .into_iter()
                    .chain(c.rows.iter().map(|r| sig6(r.contribution))),
            );
        }
        t.write(out, "  ")?;
    }
    if let Some(n) = report.recorded {
        writeln!(out)?;
        writeln!(out, "recorded {n} catalog entries")?;
    }
    Ok(())
}
