use std::collections::HashMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_reference_file, Extent, ReferenceFile, SyntheticTable};
use crate::cost::{IoMode, SystemProfile};
use crate::error::{Error, Result};
use crate::formats::FormatDescriptor;
use crate::layout::{LayoutKind, OpKind, OperationProfile};

/// Stream separating the locality draws from the data-placement draws.
const REPLAY_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Locality {
    Local,
    Remote,
    /// Local with the profile's locality probability, drawn once per chunk.
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanExtent {
    pub file: u32,
    pub offset: u64,
    pub len: u64,
    pub locality: Locality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPlan {
    pub mode: IoMode,
    pub extents: Vec<PlanExtent>,
}

impl AccessPlan {
    pub fn new(mode: IoMode) -> Self {
        Self {
            mode,
            extents: Vec::new(),
        }
    }

    /// Zero-length extents are dropped.
    pub fn push(&mut self, extent: Extent, locality: Locality) {
        if extent.len > 0 {
            self.extents.push(PlanExtent {
                file: extent.file,
                offset: extent.offset,
                len: extent.len,
                locality,
            });
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.extents.iter().map(|e| e.len).sum()
    }
}

/// Replays a plan against the profile: one seek the first time each chunk
/// of each file is touched, disk transfer for every byte, network transfer
/// for bytes of remote chunks, and `R - 1` network copies when writing.
pub fn replay_io(plan: &AccessPlan, sys: &SystemProfile, seed: u64) -> f64 {
    let chunk = (sys.chunk_size().round() as u64).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(REPLAY_STREAM);
    let mut touched: HashMap<(u32, u64), bool> = HashMap::new();
    let copies = f64::from(sys.replication_factor() - 1);
    let mut seconds = 0.0;
    for e in &plan.extents {
        let mut offset = e.offset;
        let end = e.offset + e.len;
        while offset < end {
            let c = offset / chunk;
            let piece = (end.min((c + 1) * chunk) - offset) as f64;
            offset = (c + 1) * chunk;
            let local = *touched.entry((e.file, c)).or_insert_with(|| {
                seconds += sys.seek_time();
                match e.locality {
                    Locality::Local => true,
                    Locality::Remote => false,
                    Locality::Stochastic => rng.random_bool(sys.locality_probability()),
                }
            });
            seconds += piece / sys.disk_bandwidth();
            match plan.mode {
                IoMode::Write => seconds += copies * piece / sys.network_bandwidth(),
                IoMode::Read if !local => seconds += piece / sys.network_bandwidth(),
                IoMode::Read => {}
            }
        }
    }
    seconds
}

/// Writing every file of a reference output.
pub fn write_plan(file: &ReferenceFile) -> AccessPlan {
    let mut plan = AccessPlan::new(IoMode::Write);
    for (i, &len) in file.file_lengths.iter().enumerate() {
        plan.push(Extent::new(i as u32, 0, len), Locality::Local);
    }
    plan
}

/// Which row groups contain at least one row matching a predicate of the
/// given selectivity. On a sorted key the matches are the leading rows;
/// otherwise `round(sf * rows)` rows match, placed uniformly at random.
pub fn selection_hits(file: &ReferenceFile, sf: f64, sorted: bool, seed: u64) -> Vec<bool> {
    let rows = file.rows;
    let matches = ((sf.clamp(0.0, 1.0) * rows as f64).round() as u64).min(rows);
    if sorted {
        return file
            .row_groups
            .iter()
            .map(|g| g.rows > 0 && g.first_row < matches)
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows_left = rows;
    let mut matches_left = matches;
    file.row_groups
        .iter()
        .map(|g| {
            let k = if matches_left == 0 || g.rows == 0 {
                0
            } else if matches_left >= rows_left {
                g.rows
            } else {
                super::montecarlo::sample_hypergeometric(&mut rng, rows_left, matches_left, g.rows)
            };
            rows_left -= g.rows;
            matches_left -= k.min(matches_left);
            k > 0
        })
        .collect()
}

fn check_op(op: &OperationProfile, file: &ReferenceFile) -> Result<()> {
    op.validate_self()?;
    if let Some(r) = op.ref_cols {
        if r > file.cols {
            return Err(Error::InvalidOperation(format!(
                "ref_cols {r} exceeds col_count {}",
                file.cols
            )));
        }
    }
    if op.kind == OpKind::Project && op.ref_cols.is_none() {
        return Err(Error::InvalidOperation("projection without ref_cols".into()));
    }
    if op.kind == OpKind::Select && op.selectivity.is_none() {
        return Err(Error::InvalidOperation("selection without selectivity".into()));
    }
    Ok(())
}

/// The extents a read of `file` touches for one operation. Projections read
/// a random subset of `ref_cols` columns chosen with `seed`; selections
/// fetch the row groups [`selection_hits`] marks. Every task (one per chunk
/// of the file) re-reads the per-task metadata.
pub fn access_plan(
    op: &OperationProfile,
    file: &ReferenceFile,
    sys: &SystemProfile,
    seed: u64,
) -> Result<AccessPlan> {
    check_op(op, file)?;
    let chunk = (sys.chunk_size().round() as u64).max(1);
    let total: u64 = file.file_lengths.iter().sum();
    let tasks = total.div_ceil(chunk);
    let loc = Locality::Stochastic;
    let mut plan = AccessPlan::new(IoMode::Read);
    let per_task = |plan: &mut AccessPlan| {
        for _ in 0..tasks {
            for &m in &file.per_task_meta {
                plan.push(m, loc);
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = file.format.kind();
    match (kind, op.kind) {
        (LayoutKind::Horizontal, _) | (_, OpKind::Scan) | (LayoutKind::Vertical, OpKind::Select) => {
            for (i, &len) in file.file_lengths.iter().enumerate() {
                plan.push(Extent::new(i as u32, 0, len), loc);
            }
            per_task(&mut plan);
        }
        (LayoutKind::Vertical, OpKind::Project) => {
            let refs = op.ref_cols.unwrap_or(file.cols) as usize;
            for &m in &file.header_footer {
                plan.push(m, loc);
            }
            let mut cols = index::sample(&mut rng, file.column_files.len(), refs).into_vec();
            cols.sort_unstable();
            for c in cols {
                plan.push(file.column_files[c], loc);
            }
        }
        (LayoutKind::Hybrid, OpKind::Project) => {
            let refs = op.ref_cols.unwrap_or(file.cols) as usize;
            let mut cols = index::sample(&mut rng, file.cols as usize, refs).into_vec();
            cols.sort_unstable();
            for &m in &file.header_footer {
                plan.push(m, loc);
            }
            for g in &file.row_groups {
                for &c in &cols {
                    plan.push(g.columns[c], loc);
                }
                plan.push(g.trailer, loc);
            }
            per_task(&mut plan);
        }
        (LayoutKind::Hybrid, OpKind::Select) => {
            let sf = op.selectivity.unwrap_or(1.0);
            let hits = selection_hits(file, sf, op.sorted, seed);
            for &m in &file.header_footer {
                plan.push(m, loc);
            }
            for (g, hit) in file.row_groups.iter().zip(hits) {
                if hit {
                    plan.push(g.extent, loc);
                }
            }
            per_task(&mut plan);
        }
    }
    Ok(plan)
}

pub fn simulate_on(
    op: &OperationProfile,
    file: &ReferenceFile,
    sys: &SystemProfile,
    seed: u64,
) -> Result<f64> {
    let plan = access_plan(op, file, sys, seed)?;
    Ok(replay_io(&plan, sys, seed))
}

/// Writes the table in the given format and replays the read one operation
/// implies.
pub fn simulate_operation(
    op: &OperationProfile,
    table: &SyntheticTable,
    fd: &FormatDescriptor,
    sys: &SystemProfile,
    seed: u64,
) -> Result<f64> {
    let file = write_reference_file(table, fd)?;
    simulate_on(op, &file, sys, seed)
}
