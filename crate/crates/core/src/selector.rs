//! Format decisions: rules when statistics are missing, costs when they are
//! known.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::{CostEstimate, SystemProfile};
use crate::error::{Error, Result};
use crate::formats::{FormatDescriptor, FormatName};
use crate::layout::{DataStats, OperationProfile, SizeBreakdown};
use crate::workflow::{NodeStats, SelectionOptions, StatsCatalog, Workflow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionPath {
    Rule,
    Cost,
}

impl fmt::Display for DecisionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionPath::Rule => "rule",
            DecisionPath::Cost => "cost",
        })
    }
}

/// Which path [`choose_format`] may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionPolicy {
    /// Rules only, even when statistics are known.
    Rule,
    /// Costs only; missing statistics are an error.
    Cost,
    /// Costs when statistics are complete, rules otherwise.
    #[default]
    Auto,
}

impl fmt::Display for DecisionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionPolicy::Rule => "rule",
            DecisionPolicy::Cost => "cost",
            DecisionPolicy::Auto => "auto",
        })
    }
}

impl FromStr for DecisionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rule" => Ok(DecisionPolicy::Rule),
            "cost" => Ok(DecisionPolicy::Cost),
            "auto" => Ok(DecisionPolicy::Auto),
            other => Err(Error::Parse(format!("unknown decision policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub candidates: Vec<FormatDescriptor>,
    pub system: SystemProfile,
    /// Expected number of times the outgoing reads run per write.
    pub amortization_reads: f64,
    #[serde(default)]
    pub policy: DecisionPolicy,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            candidates: FormatName::STANDARD
                .iter()
                .map(|&n| FormatDescriptor::default_for(n))
                .collect(),
            system: SystemProfile::default(),
            amortization_reads: 1.0,
            policy: DecisionPolicy::Auto,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::NoCandidates);
        }
        for c in &self.candidates {
            c.validate()?;
        }
        if !(self.amortization_reads.is_finite() && self.amortization_reads > 0.0) {
            return Err(Error::InvalidOperation(format!(
                "amortization_reads must be > 0, got {}",
                self.amortization_reads
            )));
        }
        Ok(())
    }
}

/// Cost of one downstream read under one format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationCost {
    pub operation: OperationProfile,
    pub bytes_read: f64,
    pub estimate: CostEstimate,
    /// `frequency * estimate.weighted_cost`.
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCost {
    pub format: FormatName,
    pub sections: SizeBreakdown,
    pub write: CostEstimate,
    /// Write cost divided by the amortization count.
    pub write_cost: f64,
    pub reads: Vec<OperationCost>,
    pub total_cost: f64,
}

impl CandidateCost {
    pub fn read_costs(&self) -> Vec<f64> {
        self.reads.iter().map(|r| r.weighted).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatChoice {
    pub format: FormatName,
    pub decided_by: DecisionPath,
    /// Present on the cost path.
    pub total_cost: Option<f64>,
    pub write_cost: Option<f64>,
    pub read_costs: Vec<f64>,
    /// Every candidate, cheapest first; empty on the rule path.
    pub rank: Vec<CandidateCost>,
}

/// Scan-like operations only: a row layout. Anything a columnar layout can
/// serve natively: the hybrid layout.
pub fn rule_based_choice(ops: &[OperationProfile]) -> Result<FormatName> {
    if ops.is_empty() {
        return Err(Error::EmptyOperationList);
    }
    if ops.iter().all(|o| o.kind.is_scan_like()) {
        Ok(FormatName::Avro)
    } else {
        Ok(FormatName::Parquet)
    }
}

/// [`rule_based_choice`] restricted to `candidates`. When the preferred
/// format is not offered, the richest candidate wins.
pub fn rule_based_among(ops: &[OperationProfile], candidates: &[FormatDescriptor]) -> Result<FormatName> {
    let preferred = rule_based_choice(ops)?;
    if candidates.iter().any(|c| c.name() == preferred) {
        return Ok(preferred);
    }
    candidates
        .iter()
        .map(FormatDescriptor::name)
        .max_by_key(|n| (n.richness(), n.preference()))
        .ok_or(Error::NoCandidates)
}

fn candidate_cost(
    fd: &FormatDescriptor,
    data: &DataStats,
    ops: &[OperationProfile],
    config: &SelectorConfig,
) -> Result<CandidateCost> {
    let sys = &config.system;
    let model = fd.layout(data)?;
    let write = model.write_cost(sys);
    let write_cost = write.weighted_cost / config.amortization_reads;
    let reads = ops
        .iter()
        .map(|op| {
            let estimate = model.read_cost(op, sys)?;
            Ok(OperationCost {
                operation: *op,
                bytes_read: model.read_size(op, sys)?,
                weighted: op.frequency * estimate.weighted_cost,
                estimate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total_cost = write_cost + reads.iter().map(|r| r.weighted).sum::<f64>();
    Ok(CandidateCost {
        format: fd.name(),
        sections: model.sections,
        write,
        write_cost,
        reads,
        total_cost,
    })
}

/// Cheapest first; exact ties go to the richer format.
fn rank_order(a: &CandidateCost, b: &CandidateCost) -> Ordering {
    a.total_cost
        .total_cmp(&b.total_cost)
        .then_with(|| b.format.preference().cmp(&a.format.preference()))
}

pub fn cost_based_choice(stats: &NodeStats, config: &SelectorConfig) -> Result<FormatChoice> {
    config.validate()?;
    if !stats.is_complete() {
        return Err(Error::IncompleteStats);
    }
    stats.validate()?;
    let data = stats.data.as_ref().expect("complete stats carry data");
    let mut rank = config
        .candidates
        .iter()
        .map(|fd| candidate_cost(fd, data, &stats.operations, config))
        .collect::<Result<Vec<_>>>()?;
    rank.sort_by(rank_order);
    let best = &rank[0];
    Ok(FormatChoice {
        format: best.format,
        decided_by: DecisionPath::Cost,
        total_cost: Some(best.total_cost),
        write_cost: Some(best.write_cost),
        read_costs: best.read_costs(),
        rank,
    })
}

/// Under [`DecisionPolicy::Auto`], the cost path when `stats` are complete
/// and rules on the operation kinds of `ops` otherwise.
pub fn choose_format(
    ops: &[OperationProfile],
    stats: Option<&NodeStats>,
    config: &SelectorConfig,
) -> Result<FormatChoice> {
    config.validate()?;
    match config.policy {
        DecisionPolicy::Cost => return cost_based_choice(stats.ok_or(Error::IncompleteStats)?, config),
        DecisionPolicy::Auto => {
            if let Some(s) = stats.filter(|s| s.is_complete()) {
                return cost_based_choice(s, config);
            }
        }
        DecisionPolicy::Rule => {}
    }
    let kinds = match stats {
        Some(s) if !s.operations.is_empty() => &s.operations[..],
        _ => ops,
    };
    Ok(FormatChoice {
        format: rule_based_among(kinds, &config.candidates)?,
        decided_by: DecisionPath::Rule,
        total_cost: None,
        write_cost: None,
        read_costs: Vec::new(),
        rank: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDecision {
    pub node: String,
    pub kind: String,
    pub fingerprint: String,
    pub operations: Vec<OperationProfile>,
    pub choice: FormatChoice,
}

/// Statistics for a node: the catalog entry under its fingerprint, else
/// whatever the workflow document states. A catalog entry without
/// operations borrows the workflow's.
pub fn resolve_stats(
    wf: &Workflow,
    node: &str,
    fingerprint: &str,
    catalog: Option<&StatsCatalog>,
) -> Result<Option<NodeStats>> {
    let from_doc = wf.node_stats(node)?;
    match catalog.and_then(|c| c.lookup(fingerprint)) {
        Some(entry) => {
            let mut s = entry.clone();
            if s.operations.is_empty() {
                s.operations = from_doc.operations;
            }
            Ok(Some(s))
        }
        None if from_doc.data.is_some() => Ok(Some(from_doc)),
        None => Ok(None),
    }
}

/// Decides a format for every node the heuristics select, in topological
/// order.
pub fn choose_for_workflow(
    wf: &Workflow,
    catalog: Option<&StatsCatalog>,
    selection: SelectionOptions,
    config: &SelectorConfig,
) -> Result<Vec<NodeDecision>> {
    let fps = wf.fingerprints();
    wf.select_materialization_nodes(selection)
        .into_iter()
        .map(|n| {
            let fp = &fps[&n.id];
            let ops = wf.outgoing_operations(&n.id)?;
            let stats = resolve_stats(wf, &n.id, fp, catalog)?;
            let choice = choose_format(&ops, stats.as_ref(), config)?;
            Ok(NodeDecision {
                node: n.id.clone(),
                kind: n.kind.to_string(),
                fingerprint: fp.clone(),
                operations: stats.map(|s| s.operations).unwrap_or(ops),
                choice,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub format: FormatName,
    /// `write`, or the operation kind of a read.
    pub item: String,
    pub bytes: f64,
    pub chunks: f64,
    pub seeks: u64,
    pub cost: f64,
    pub frequency: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatReport {
    pub format: FormatName,
    pub sections: SizeBreakdown,
    pub total_cost: f64,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceReport {
    pub chosen: FormatName,
    pub decided_by: DecisionPath,
    pub candidates: Vec<FormatReport>,
}

/// Per-format breakdown of a choice, in rank order.
pub fn explain(choice: &FormatChoice) -> ChoiceReport {
    let candidates = choice
        .rank
        .iter()
        .map(|c| {
            let mut rows = vec![ReportRow {
                format: c.format,
                item: "write".into(),
                bytes: c.sections.total,
                chunks: c.write.chunks,
                seeks: c.write.seeks,
                cost: c.write.weighted_cost,
                frequency: 1.0,
                contribution: c.write_cost,
            }];
            rows.extend(c.reads.iter().map(|r| ReportRow {
                format: c.format,
                item: describe_op(&r.operation),
                bytes: r.bytes_read,
                chunks: r.estimate.chunks,
                seeks: r.estimate.seeks,
                cost: r.estimate.weighted_cost,
                frequency: r.operation.frequency,
                contribution: r.weighted,
            }));
            FormatReport {
                format: c.format,
                sections: c.sections,
                total_cost: c.total_cost,
                rows,
            }
        })
        .collect();
    ChoiceReport {
        chosen: choice.format,
        decided_by: choice.decided_by,
        candidates,
    }
}

pub fn describe_op(op: &OperationProfile) -> String {
    use crate::layout::OpKind;
    match op.kind {
        OpKind::Scan => "scan".into(),
        OpKind::Project => match op.ref_cols {
            Some(r) => format!("project({r})"),
            None => "project(?)".into(),
        },
        OpKind::Select => {
            let sorted = if op.sorted { ",sorted" } else { "" };
            match op.selectivity {
                Some(sf) => format!("select({sf}{sorted})"),
                None => format!("select(?{sorted})"),
            }
        }
    }
}
