//! Bundled synthetic inputs: a TPC-DS-like workflow whose nine
//! materialization candidates have known outgoing operations, statistics
//! for those nodes, and a wide TPC-H-like join result.
//!
//! All statistics here are synthesized, not measured.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::FormatName;
use crate::layout::DataStats;
use crate::workflow::{parse_workflow, StatsCatalog, Workflow};

pub const TPCDS_WORKFLOW_JSON: &str = include_str!("../fixtures/tpcds_workflow.json");
pub const TPCDS_CATALOG_JSON: &str = include_str!("../fixtures/tpcds_catalog.json");
pub const LINEITEM_PART_STATS_JSON: &str = include_str!("../fixtures/lineitem_part_stats.json");

/// The nodes both heuristics select from [`tpcds_workflow`], in order.
pub const MATERIALIZED_NODES: [&str; 9] = ["N1", "N2", "N3", "N4", "N5", "N6", "N7", "N8", "N9"];

pub fn tpcds_workflow() -> Workflow {
    parse_workflow(TPCDS_WORKFLOW_JSON).expect("bundled workflow parses")
}

pub fn tpcds_catalog() -> StatsCatalog {
    StatsCatalog::from_json(TPCDS_CATALOG_JSON).expect("bundled catalog loads")
}

pub fn lineitem_part_stats() -> DataStats {
    serde_json::from_str(LINEITEM_PART_STATS_JSON).expect("bundled stats parse")
}

/// Expected decisions for the nine nodes without statistics.
pub fn expected_rule_choices() -> [(&'static str, FormatName); 9] {
    use FormatName::{Avro, Parquet};
    [
        ("N1", Avro),
        ("N2", Parquet),
        ("N3", Parquet),
        ("N4", Parquet),
        ("N5", Parquet),
        ("N6", Parquet),
        ("N7", Parquet),
        ("N8", Parquet),
        ("N9", Avro),
    ]
}

/// Expected decisions for the nine nodes with statistics.
pub fn expected_cost_choices() -> [(&'static str, FormatName); 9] {
    use FormatName::{Avro, Parquet};
    [
        ("N1", Avro),
        ("N2", Avro),
        ("N3", Avro),
        ("N4", Avro),
        ("N5", Parquet),
        ("N6", Parquet),
        ("N7", Avro),
        ("N8", Avro),
        ("N9", Avro),
    ]
}

/// Column mix of a synthesized table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnMix {
    pub rows: u64,
    pub fixed_cols: u32,
    pub fixed_width: f64,
    pub varlen_cols: u32,
    pub varlen_width: f64,
}

impl ColumnMix {
    pub fn stats(&self) -> DataStats {
        let cols = self.fixed_cols + self.varlen_cols;
        let row = f64::from(self.fixed_cols) * self.fixed_width
            + f64::from(self.varlen_cols) * self.varlen_width;
        DataStats {
            row_count: self.rows,
            avg_row_size: row,
            avg_col_size: row / f64::from(cols),
            col_count: cols,
            varlen_col_count: self.varlen_cols,
        }
    }
}

/// Synthesized statistics of the nine materialized nodes.
pub fn materialized_node_mixes() -> [(&'static str, ColumnMix); 9] {
    let mix = |rows, fixed_cols, fixed_width, varlen_cols, varlen_width| ColumnMix {
        rows,
        fixed_cols,
        fixed_width,
        varlen_cols,
        varlen_width,
    };
    [
        ("N1", mix(28_800_000, 12, 8.0, 10, 20.0)),
        ("N2", mix(28_800_000, 14, 8.0, 10, 24.0)),
        ("N3", mix(14_400_000, 12, 8.0, 8, 20.0)),
        ("N4", mix(2_000_000, 8, 4.0, 10, 20.0)),
        ("N5", mix(7_200_000, 14, 8.0, 10, 32.0)),
        ("N6", mix(1_100_000, 10, 8.0, 6, 16.0)),
        ("N7", mix(50_000_000, 7, 4.0, 5, 12.0)),
        ("N8", mix(28_800_000, 14, 8.0, 12, 20.0)),
        ("N9", mix(2_000_000, 8, 4.0, 12, 20.0)),
    ]
}

/// What a first execution of [`tpcds_workflow`] would record: the
/// synthesized statistics of the nine nodes plus their outgoing reads.
pub fn synthesize_tpcds_catalog() -> Result<StatsCatalog> {
    let wf = tpcds_workflow();
    let fps = wf.fingerprints();
    let mut catalog = StatsCatalog::new();
    for (id, mix) in materialized_node_mixes() {
        let mut stats = wf.node_stats(id)?;
        stats.data = Some(mix.stats());
        catalog.record(&fps[id], stats)?;
    }
    Ok(catalog)
}

pub const SWEEP_ROWS: [u64; 3] = [1_000_000, 10_000_000, 100_000_000];
pub const SWEEP_COLS: [u32; 4] = [12, 20, 30, 40];
pub const SWEEP_VARLEN_SHARE: [f64; 3] = [0.35, 0.5, 0.65];
pub const SWEEP_FIXED_WIDTH: [f64; 2] = [4.0, 8.0];
pub const SWEEP_VARLEN_WIDTH: [f64; 3] = [12.0, 20.0, 32.0];

/// A plausible region of TPC-DS-like intermediate results.
pub fn sweep_mixes() -> Vec<ColumnMix> {
    let mut out = Vec::new();
    for rows in SWEEP_ROWS {
        for cols in SWEEP_COLS {
            for share in SWEEP_VARLEN_SHARE {
                let varlen_cols = (share * f64::from(cols)).round() as u32;
                for fixed_width in SWEEP_FIXED_WIDTH {
                    for varlen_width in SWEEP_VARLEN_WIDTH {
                        out.push(ColumnMix {
                            rows,
                            fixed_cols: cols - varlen_cols,
                            fixed_width,
                            varlen_cols,
                            varlen_width,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub mix: ColumnMix,
    pub node: String,
    pub chosen: FormatName,
    pub expected: FormatName,
}

/// Cost-based decisions for the nine nodes of [`tpcds_workflow`] with every
/// node given the statistics of each point of [`sweep_mixes`].
pub fn decision_sweep(config: &crate::selector::SelectorConfig) -> Result<Vec<SweepOutcome>> {
    use rayon::prelude::*;
    let wf = tpcds_workflow();
    let expected = expected_cost_choices();
    let ops = expected
        .iter()
        .map(|(id, _)| wf.outgoing_operations(id))
        .collect::<Result<Vec<_>>>()?;
    let per_mix = sweep_mixes()
        .par_iter()
        .map(|mix| {
            expected
                .iter()
                .zip(&ops)
                .map(|((id, want), ops)| {
                    let stats = crate::workflow::NodeStats::new(mix.stats(), ops.clone());
                    let choice = crate::selector::cost_based_choice(&stats, config)?;
                    Ok(SweepOutcome {
                        mix: *mix,
                        node: id.to_string(),
                        chosen: choice.format,
                        expected: *want,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_mix.into_iter().flatten().collect())
}
