//! Workflow DAGs, materialization-node selection and the statistics catalog.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::layout::{DataStats, OpKind, OperationProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NodeKind {
    Load,
    Filter,
    Foreach,
    Join,
    GroupBy,
    Store,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Load => "LOAD",
            NodeKind::Filter => "FILTER",
            NodeKind::Foreach => "FOREACH",
            NodeKind::Join => "JOIN",
            NodeKind::GroupBy => "GROUPBY",
            NodeKind::Store => "STORE",
        }
    }

    /// How a consumer of this kind reads its input.
    pub fn access(self) -> OpKind {
        match self {
            NodeKind::Filter => OpKind::Select,
            NodeKind::Foreach => OpKind::Project,
            _ => OpKind::Scan,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LOAD" => Ok(NodeKind::Load),
            "FILTER" => Ok(NodeKind::Filter),
            "FOREACH" | "PROJECT" => Ok(NodeKind::Foreach),
            "JOIN" => Ok(NodeKind::Join),
            "GROUPBY" | "GROUP_BY" | "GROUP" => Ok(NodeKind::GroupBy),
            "STORE" => Ok(NodeKind::Store),
            _ => Err(Error::UnknownOperationKind(s.to_string())),
        }
    }
}

impl TryFrom<String> for NodeKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NodeKind> for String {
    fn from(k: NodeKind) -> Self {
        k.as_str().to_string()
    }
}

/// A node as written in a workflow document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_cols: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sorted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<DataStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowDocument {
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub sf: Option<f64>,
    pub ref_cols: Option<u32>,
    pub frequency: Option<f64>,
    pub sorted: bool,
    pub source: Option<String>,
    /// Statistics of the node's output, when known.
    pub stats: Option<DataStats>,
}

impl Node {
    /// The read this node performs on each of its inputs.
    pub fn as_consumer(&self) -> OperationProfile {
        let mut op = OperationProfile::scan();
        op.kind = self.kind.access();
        match op.kind {
            OpKind::Select => {
                op.selectivity = self.sf;
                op.sorted = self.sorted;
            }
            OpKind::Project => op.ref_cols = self.ref_cols,
            OpKind::Scan => {}
        }
        op.frequency = self.frequency.unwrap_or(1.0);
        op
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Conservative,
    Aggressive,
    Both,
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "conservative" => Ok(SelectionMode::Conservative),
            "aggressive" => Ok(SelectionMode::Aggressive),
            "both" => Ok(SelectionMode::Both),
            other => Err(Error::Parse(format!("unknown selection mode `{other}`"))),
        }
    }
}

impl SelectionMode {
    pub fn admits(self, kind: NodeKind) -> bool {
        let conservative = matches!(kind, NodeKind::Filter | NodeKind::Foreach);
        let aggressive = matches!(kind, NodeKind::Join | NodeKind::GroupBy);
        match self {
            SelectionMode::Conservative => conservative,
            SelectionMode::Aggressive => aggressive,
            SelectionMode::Both => conservative || aggressive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionOptions {
    pub mode: SelectionMode,
    /// Whether a STORE consumer alone makes a node worth materializing. By
    /// default only outputs that feed further computation qualify.
    #[serde(default)]
    pub count_store_consumers: bool,
}

impl SelectionOptions {
    pub fn new(mode: SelectionMode) -> Self {
        Self {
            mode,
            count_store_consumers: false,
        }
    }
}

/// Validated, acyclic workflow. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Workflow {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    inputs: Vec<Vec<usize>>,
    outputs: Vec<Vec<usize>>,
    order: Vec<usize>,
}

pub fn parse_workflow(json: &str) -> Result<Workflow> {
    let doc: WorkflowDocument =
        serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    Workflow::from_document(doc)
}

impl Workflow {
    pub fn from_document(doc: WorkflowDocument) -> Result<Self> {
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        let mut index = HashMap::new();
        for n in doc.nodes {
            let kind: NodeKind = n.kind.parse()?;
            if index.insert(n.id.clone(), nodes.len()).is_some() {
                return Err(Error::Parse(format!("duplicate node id `{}`", n.id)));
            }
            if let Some(sf) = n.sf {
                if !(0.0..=1.0).contains(&sf) {
                    return Err(Error::Parse(format!(
                        "node `{}`: sf must be in [0, 1], got {sf}",
                        n.id
                    )));
                }
            }
            if n.ref_cols == Some(0) {
                return Err(Error::Parse(format!("node `{}`: ref_cols must be >= 1", n.id)));
            }
            if let Some(f) = n.frequency {
                if !(f.is_finite() && f > 0.0) {
                    return Err(Error::Parse(format!(
                        "node `{}`: frequency must be > 0, got {f}",
                        n.id
                    )));
                }
            }
            if let Some(s) = &n.stats {
                s.validate()
                    .map_err(|e| Error::Parse(format!("node `{}`: {e}", n.id)))?;
            }
            nodes.push(Node {
                id: n.id,
                kind,
                sf: n.sf,
                ref_cols: n.ref_cols,
                frequency: n.frequency,
                sorted: n.sorted,
                source: n.source,
                stats: n.stats,
            });
        }
        let mut inputs = vec![Vec::new(); nodes.len()];
        let mut outputs = vec![Vec::new(); nodes.len()];
        for e in &doc.edges {
            let from = *index
                .get(&e.from)
                .ok_or_else(|| Error::DanglingEdge(e.from.clone()))?;
            let to = *index
                .get(&e.to)
                .ok_or_else(|| Error::DanglingEdge(e.to.clone()))?;
            outputs[from].push(to);
            inputs[to].push(from);
        }
        for (i, n) in nodes.iter().enumerate() {
            match n.kind {
                NodeKind::Load if !inputs[i].is_empty() => {
                    return Err(Error::Parse(format!("LOAD node `{}` has inputs", n.id)));
                }
                NodeKind::Load => {}
                _ if inputs[i].is_empty() => {
                    return Err(Error::Parse(format!("node `{}` has no input", n.id)));
                }
                NodeKind::Store if !outputs[i].is_empty() => {
                    return Err(Error::Parse(format!("STORE node `{}` has consumers", n.id)));
                }
                _ => {}
            }
        }
        let order = topological_order(&nodes, &inputs, &outputs)?;
        Ok(Self {
            nodes,
            index,
            inputs,
            outputs,
            order,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    fn idx(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::DanglingEdge(id.to_string()))
    }

    pub fn inputs(&self, id: &str) -> Result<Vec<&Node>> {
        Ok(self.inputs[self.idx(id)?].iter().map(|&i| &self.nodes[i]).collect())
    }

    pub fn consumers(&self, id: &str) -> Result<Vec<&Node>> {
        Ok(self.outputs[self.idx(id)?].iter().map(|&i| &self.nodes[i]).collect())
    }

    /// Reads of this node's output by its consumers, in edge order. STORE
    /// consumers are included as scans.
    pub fn outgoing_operations(&self, id: &str) -> Result<Vec<OperationProfile>> {
        Ok(self.consumers(id)?.iter().map(|c| c.as_consumer()).collect())
    }

    /// Node ids in topological order.
    pub fn topological_ids(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.nodes[i].id.as_str()).collect()
    }

    /// Outputs worth materializing, in topological order.
    pub fn select_materialization_nodes(&self, opts: SelectionOptions) -> Vec<&Node> {
        self.order
            .iter()
            .filter(|&&i| {
                let n = &self.nodes[i];
                opts.mode.admits(n.kind)
                    && self.outputs[i].iter().any(|&c| {
                        opts.count_store_consumers || self.nodes[c].kind != NodeKind::Store
                    })
            })
            .map(|&i| &self.nodes[i])
            .collect()
    }

    /// Structural hash of every node's producing sub-DAG. Node ids do not
    /// take part, so relabeled but identical computations share a key.
    pub fn fingerprints(&self) -> HashMap<String, String> {
        let mut fp: Vec<String> = vec![String::new(); self.nodes.len()];
        for &i in &self.order {
            let n = &self.nodes[i];
            let mut parents: Vec<&str> = self.inputs[i].iter().map(|&p| fp[p].as_str()).collect();
            parents.sort_unstable();
            let mut h = Sha256::new();
            h.update(n.kind.as_str().as_bytes());
            h.update(b"\x00");
            h.update(n.source.as_deref().unwrap_or("").as_bytes());
            h.update(b"\x00");
            h.update(format!("{:?}|{:?}|{}", n.sf, n.ref_cols, n.sorted).as_bytes());
            for p in parents {
                h.update(b"\x00");
                h.update(p.as_bytes());
            }
            fp[i] = hex::encode(h.finalize());
        }
        self.nodes
            .iter()
            .zip(fp)
            .map(|(n, f)| (n.id.clone(), f))
            .collect()
    }

    pub fn fingerprint(&self, id: &str) -> Result<String> {
        self.idx(id)?;
        Ok(self.fingerprints().remove(id).expect("every node has a fingerprint"))
    }

    /// Statistics of a node as its workflow document describes them.
    pub fn node_stats(&self, id: &str) -> Result<NodeStats> {
        let i = self.idx(id)?;
        Ok(NodeStats {
            data: self.nodes[i].stats,
            operations: self.outgoing_operations(id)?,
        })
    }

    /// Records the statistics of every node whose output statistics are
    /// known, as an execution of the workflow would.
    pub fn record_into(&self, catalog: &mut StatsCatalog) -> Result<usize> {
        let fps = self.fingerprints();
        let mut n = 0;
        for &i in &self.order {
            let node = &self.nodes[i];
            if node.stats.is_some() {
                catalog.record(&fps[&node.id], self.node_stats(&node.id)?)?;
                n += 1;
            }
        }
        Ok(n)
    }
}

fn topological_order(
    nodes: &[Node],
    inputs: &[Vec<usize>],
    outputs: &[Vec<usize>],
) -> Result<Vec<usize>> {
    let mut indegree: Vec<usize> = inputs.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &c in &outputs[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if order.len() < nodes.len() {
        let stuck = (0..nodes.len())
            .find(|&i| indegree[i] > 0)
            .expect("some node is left on a cycle");
        return Err(Error::CycleDetected(nodes[stuck].id.clone()));
    }
    Ok(order)
}

/// Data statistics of a node's output plus the reads of its consumers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    #[serde(default)]
    pub data: Option<DataStats>,
    #[serde(default)]
    pub operations: Vec<OperationProfile>,
}

impl NodeStats {
    pub fn new(data: DataStats, operations: Vec<OperationProfile>) -> Self {
        Self {
            data: Some(data),
            operations,
        }
    }

    /// Whether cost-based selection can run on these statistics.
    pub fn is_complete(&self) -> bool {
        self.data.is_some()
            && !self.operations.is_empty()
            && self.operations.iter().all(OperationProfile::is_complete)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::InconsistentStats(e.to_string());
        if let Some(d) = &self.data {
            d.validate().map_err(wrap)?;
        }
        for op in &self.operations {
            match &self.data {
                Some(d) => op.validate(d).map_err(wrap)?,
                None => op.validate_self().map_err(wrap)?,
            }
        }
        Ok(())
    }
}

pub const CATALOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsCatalog {
    pub schema_version: u32,
    /// Incremented on every recorded update.
    pub version: u64,
    pub entries: BTreeMap<String, NodeStats>,
}

impl Default for StatsCatalog {
    fn default() -> Self {
        Self {
            schema_version: CATALOG_SCHEMA_VERSION,
            version: 0,
            entries: BTreeMap::new(),
        }
    }
}

impl StatsCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Last writer wins.
    pub fn record(&mut self, fingerprint: &str, stats: NodeStats) -> Result<()> {
        stats.validate()?;
        self.entries.insert(fingerprint.to_string(), stats);
        self.version += 1;
        Ok(())
    }

    pub fn lookup(&self, fingerprint: &str) -> Option<&NodeStats> {
        self.entries.get(fingerprint)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    /// Unreadable documents and documents without the expected schema
    /// version are both reported as a version mismatch.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|_| Error::SchemaVersionMismatch {
                expected: CATALOG_SCHEMA_VERSION,
                found: None,
            })?;
        let found = value.get("schema_version").and_then(|v| v.as_u64());
        if found != Some(u64::from(CATALOG_SCHEMA_VERSION)) {
            return Err(Error::SchemaVersionMismatch {
                expected: CATALOG_SCHEMA_VERSION,
                found,
            });
        }
        let catalog: StatsCatalog =
            serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        for s in catalog.entries.values() {
            s.validate()?;
        }
        Ok(catalog)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
