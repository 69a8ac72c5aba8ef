//! Independent ground truth: synthetic tables, byte-accounting reference
//! writers, a Monte Carlo row-group hit estimator and an I/O replay
//! simulator.
//!
//! The writers emulate the physical structure of each format (headers,
//! per-row metadata, sync markers, row groups, pages, footers) closely
//! enough for byte accounting. They do not produce files other tools can
//! read.

mod montecarlo;
mod replay;
mod writers;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{FormatDescriptor, FormatName};
use crate::layout::{DataStats, SizeBreakdown};

pub use montecarlo::monte_carlo_rg_hit;
pub use replay::{
    access_plan, replay_io, selection_hits, simulate_on, simulate_operation, write_plan,
    AccessPlan, Locality, PlanExtent,
};
pub use writers::{ByteSink, ByteTag, CountingSink, DirSink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    /// Bytes per value; the mean length for variable-length columns.
    pub width: u32,
    #[serde(default)]
    pub varlen: bool,
}

impl ColumnSpec {
    pub fn fixed(width: u32) -> Self {
        Self {
            width,
            varlen: false,
        }
    }

    pub fn varlen(width: u32) -> Self {
        Self {
            width,
            varlen: true,
        }
    }
}

/// Desk-scale stand-in for an intermediate result. Variable-length values
/// draw their length uniformly from `[w - w/2, w + w/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTable {
    pub row_count: u64,
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub sort_key: Option<usize>,
    pub seed: u64,
}

impl SyntheticTable {
    pub fn new(row_count: u64, columns: Vec<ColumnSpec>, seed: u64) -> Self {
        Self {
            row_count,
            columns,
            sort_key: None,
            seed,
        }
    }

    pub fn uniform(row_count: u64, cols: usize, width: u32, seed: u64) -> Self {
        Self::new(row_count, vec![ColumnSpec::fixed(width); cols], seed)
    }

    pub fn with_sort_key(mut self, col: usize) -> Self {
        self.sort_key = Some(col);
        self
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidStats("synthetic table without columns".into()));
        }
        if self.columns.len() > u32::MAX as usize {
            return Err(Error::InvalidStats("too many columns".into()));
        }
        if self.columns.iter().any(|c| c.width == 0) {
            return Err(Error::InvalidStats("column widths must be > 0".into()));
        }
        if let Some(k) = self.sort_key {
            if k >= self.columns.len() {
                return Err(Error::InvalidStats(format!(
                    "sort key {k} out of range for {} columns",
                    self.columns.len()
                )));
            }
        }
        Ok(())
    }

    /// Statistics implied by the column widths, without generating data.
    pub fn expected_stats(&self) -> DataStats {
        let row: f64 = self.columns.iter().map(|c| f64::from(c.width)).sum();
        let cols = self.columns.len() as u32;
        DataStats {
            row_count: self.row_count,
            avg_row_size: row,
            avg_col_size: row / f64::from(cols),
            col_count: cols,
            varlen_col_count: self.columns.iter().filter(|c| c.varlen).count() as u32,
        }
    }

    fn rows(&self) -> RowGen {
        RowGen {
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            columns: self.columns.clone(),
        }
    }
}

/// Deterministic stream of per-row value lengths.
struct RowGen {
    rng: ChaCha8Rng,
    columns: Vec<ColumnSpec>,
}

impl RowGen {
    fn fill(&mut self, out: &mut [u32]) {
        for (slot, col) in out.iter_mut().zip(&self.columns) {
            *slot = if col.varlen {
                let half = col.width / 2;
                self.rng.random_range(col.width - half..=col.width + half)
            } else {
                col.width
            };
        }
    }
}

/// Byte range inside one physical file of a reference output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extent {
    pub file: u32,
    pub offset: u64,
    pub len: u64,
}

impl Extent {
    pub fn new(file: u32, offset: u64, len: u64) -> Self {
        Self { file, offset, len }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowGroupLayout {
    pub first_row: u64,
    pub rows: u64,
    /// The whole group, column chunks and trailer.
    pub extent: Extent,
    pub columns: Vec<Extent>,
    pub trailer: Extent,
    pub pages: u64,
}

/// Exact byte accounting of one written reference file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFile {
    pub format: FormatName,
    pub header: u64,
    pub body: u64,
    pub footer: u64,
    pub rows: u64,
    pub cols: u32,
    /// Length of every physical file; only the vertical layout uses more
    /// than one.
    pub file_lengths: Vec<u64>,
    /// Metadata every task re-reads.
    pub per_task_meta: Vec<Extent>,
    /// Header and footer, read once by projections and selections.
    pub header_footer: Vec<Extent>,
    pub sync_markers: u64,
    pub blocks: u64,
    pub pages: u64,
    pub row_groups: Vec<RowGroupLayout>,
    /// Vertical layout: one extent per column file.
    pub column_files: Vec<Extent>,
}

impl ReferenceFile {
    pub fn total(&self) -> u64 {
        self.header + self.body + self.footer
    }

    pub fn sections(&self) -> SizeBreakdown {
        SizeBreakdown::new(self.header as f64, self.body as f64, self.footer as f64)
    }
}

/// Running statistics of the generated values.
#[derive(Debug, Clone, Default)]
struct StatsAccumulator {
    rows: u64,
    payload: u64,
}

impl StatsAccumulator {
    fn push(&mut self, widths: &[u32]) {
        self.rows += 1;
        self.payload += widths.iter().map(|&w| u64::from(w)).sum::<u64>();
    }

    fn finish(&self, table: &SyntheticTable) -> DataStats {
        if self.rows == 0 {
            return table.expected_stats();
        }
        let expected = table.expected_stats();
        let row = self.payload as f64 / self.rows as f64;
        DataStats {
            row_count: self.rows,
            avg_row_size: row,
            avg_col_size: row / f64::from(expected.col_count),
            ..expected
        }
    }
}

/// Writes `table` once in every requested format and returns the measured
/// statistics of the generated data together with one accounting per format.
pub fn write_reference_files(
    table: &SyntheticTable,
    formats: &[FormatDescriptor],
) -> Result<(DataStats, Vec<ReferenceFile>)> {
    let sinks = formats.iter().map(|_| CountingSink::default()).collect();
    write_with_sinks(table, formats, sinks)
}

pub fn write_reference_file(
    table: &SyntheticTable,
    fd: &FormatDescriptor,
) -> Result<ReferenceFile> {
    let (_, mut files) = write_reference_files(table, std::slice::from_ref(fd))?;
    Ok(files.remove(0))
}

/// Like [`write_reference_file`] but also materializes the byte stream under
/// `dir` for inspection. Each metadata kind is filled with its own byte.
pub fn dump_reference_file(
    table: &SyntheticTable,
    fd: &FormatDescriptor,
    dir: &Path,
) -> Result<ReferenceFile> {
    let sink = DirSink::new(dir, fd.name().as_str())?;
    let (_, mut files) = write_with_sinks(table, std::slice::from_ref(fd), vec![sink])?;
    Ok(files.remove(0))
}

/// Statistics of the generated data, as a workflow would collect them.
pub fn measured_stats(table: &SyntheticTable) -> Result<DataStats> {
    Ok(write_reference_files(table, &[])?.0)
}

fn write_with_sinks<S: ByteSink>(
    table: &SyntheticTable,
    formats: &[FormatDescriptor],
    sinks: Vec<S>,
) -> Result<(DataStats, Vec<ReferenceFile>)> {
    let (stats, done) = write_returning_sinks(table, formats, sinks)?;
    Ok((stats, done.into_iter().map(|(f, _)| f).collect()))
}

fn write_returning_sinks<S: ByteSink>(
    table: &SyntheticTable,
    formats: &[FormatDescriptor],
    sinks: Vec<S>,
) -> Result<(DataStats, Vec<(ReferenceFile, S)>)> {
    table.validate()?;
    let mut writers = formats
        .iter()
        .zip(sinks)
        .map(|(fd, sink)| {
            fd.validate()?;
            writers::Writer::new(fd, table, sink)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut gen = table.rows();
    let mut widths = vec![0u32; table.cols()];
    let mut acc = StatsAccumulator::default();
    for _ in 0..table.row_count {
        gen.fill(&mut widths);
        acc.push(&widths);
        for w in &mut writers {
            w.push_row(&widths)?;
        }
    }
    let files = writers
        .into_iter()
        .map(|w| w.finish())
        .collect::<Result<Vec<_>>>()?;
    Ok((acc.finish(table), files))
}
