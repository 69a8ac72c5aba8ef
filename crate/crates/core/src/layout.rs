//! Format-independent size and read-cost models for horizontal, vertical
//! and hybrid layouts.
//!
//! [`LayoutModel`] bundles the statistics of an intermediate result, the
//! metadata geometry of a layout and the section sizes of the file. The
//! free functions evaluate the generic equations directly from a geometry;
//! concrete formats build a model from their own section calculators (see
//! [`crate::formats`]) and reuse the same read-cost machinery.

use serde::{Deserialize, Serialize};

use crate::cost::{self, ceil_count, CostEstimate, SystemProfile};
use crate::error::{Error, Result};

/// Extra bytes stored per value of a variable-length column (length prefix).
pub const VARLEN_PREFIX_BYTES: f64 = 4.0;

/// Statistics of one intermediate result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataStats {
    pub row_count: u64,
    /// Average payload bytes per row.
    pub avg_row_size: f64,
    /// Average payload bytes per value, length prefixes excluded.
    pub avg_col_size: f64,
    pub col_count: u32,
    #[serde(default)]
    pub varlen_col_count: u32,
}

impl DataStats {
    pub fn new(row_count: u64, avg_col_size: f64, col_count: u32) -> Self {
        Self {
            row_count,
            avg_row_size: avg_col_size * f64::from(col_count),
            avg_col_size,
            col_count,
            varlen_col_count: 0,
        }
    }

    pub fn with_varlen(mut self, varlen_col_count: u32) -> Self {
        self.varlen_col_count = varlen_col_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.col_count < 1 {
            return Err(Error::InvalidStats("col_count must be >= 1".into()));
        }
        if self.varlen_col_count > self.col_count {
            return Err(Error::InvalidStats(format!(
                "varlen_col_count {} exceeds col_count {}",
                self.varlen_col_count, self.col_count
            )));
        }
        if !(self.avg_col_size.is_finite() && self.avg_col_size > 0.0) {
            return Err(Error::InvalidStats(format!(
                "avg_col_size must be > 0, got {}",
                self.avg_col_size
            )));
        }
        let row_ok = if self.row_count > 0 {
            self.avg_row_size > 0.0
        } else {
            self.avg_row_size >= 0.0
        };
        if !(self.avg_row_size.is_finite() && row_ok) {
            return Err(Error::InvalidStats(format!(
                "avg_row_size must be > 0 for a non-empty table, got {}",
                self.avg_row_size
            )));
        }
        Ok(())
    }

    /// Average stored bytes per value: payload plus the length prefix of the
    /// variable-length columns, spread over all columns.
    pub fn effective_col_size(&self) -> f64 {
        self.avg_col_size
            + VARLEN_PREFIX_BYTES * f64::from(self.varlen_col_count) / f64::from(self.col_count)
    }

    pub fn rows(&self) -> f64 {
        self.row_count as f64
    }

    pub fn cols(&self) -> f64 {
        f64::from(self.col_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    Horizontal,
    Vertical,
    Hybrid,
}

/// Byte sizes of the metadata a layout adds around and inside its data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutGeometry {
    pub kind: LayoutKind,
    pub header_size: f64,
    pub footer_size: f64,
    /// Metadata every task re-reads.
    pub per_task_meta: f64,
    /// Horizontal: metadata per row.
    pub row_meta: f64,
    /// Horizontal: metadata for the whole body.
    pub body_meta: f64,
    /// Vertical: metadata per column.
    pub vcol_meta: f64,
    /// Hybrid: metadata per column inside a row group.
    pub hybrid_col_meta: f64,
    /// Hybrid: metadata per row group.
    pub rowgroup_meta: f64,
    pub rowgroup_size: f64,
}

impl Default for LayoutGeometry {
    fn default() -> Self {
        Self {
            kind: LayoutKind::Horizontal,
            header_size: 0.0,
            footer_size: 0.0,
            per_task_meta: 0.0,
            row_meta: 0.0,
            body_meta: 0.0,
            vcol_meta: 0.0,
            hybrid_col_meta: 0.0,
            rowgroup_meta: 0.0,
            rowgroup_size: 0.0,
        }
    }
}

impl LayoutGeometry {
    pub fn of_kind(kind: LayoutKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("header_size", self.header_size),
            ("footer_size", self.footer_size),
            ("per_task_meta", self.per_task_meta),
            ("row_meta", self.row_meta),
            ("body_meta", self.body_meta),
            ("vcol_meta", self.vcol_meta),
            ("hybrid_col_meta", self.hybrid_col_meta),
            ("rowgroup_meta", self.rowgroup_meta),
            ("rowgroup_size", self.rowgroup_size),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidGeometry(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.kind == LayoutKind::Hybrid && self.rowgroup_size <= 0.0 {
            return Err(Error::InvalidGeometry(
                "hybrid layouts need rowgroup_size > 0".into(),
            ));
        }
        Ok(())
    }

    fn expect(&self, kind: LayoutKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: kind,
                found: self.kind,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Scan,
    Project,
    Select,
}

impl OpKind {
    /// Operations that read every byte regardless of layout support.
    pub fn is_scan_like(self) -> bool {
        self == OpKind::Scan
    }
}

fn default_frequency() -> f64 {
    1.0
}

/// One downstream read of a materialized result. `ref_cols` and
/// `selectivity` stay optional so that missing workload statistics can be
/// told apart from present ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperationProfile {
    pub kind: OpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_cols: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selectivity: Option<f64>,
    #[serde(default)]
    pub sorted: bool,
    #[serde(default = "default_frequency")]
    pub frequency: f64,
}

impl OperationProfile {
    pub fn scan() -> Self {
        Self {
            kind: OpKind::Scan,
            ref_cols: None,
            selectivity: None,
            sorted: false,
            frequency: 1.0,
        }
    }

    pub fn project(ref_cols: u32) -> Self {
        Self {
            kind: OpKind::Project,
            ref_cols: Some(ref_cols),
            ..Self::scan()
        }
    }

    pub fn select(selectivity: f64, sorted: bool) -> Self {
        Self {
            kind: OpKind::Select,
            selectivity: Some(selectivity),
            sorted,
            ..Self::scan()
        }
    }

    pub fn with_frequency(mut self, frequency: f64) -> Self {
        self.frequency = frequency;
        self
    }

    /// Whether every statistic this kind of operation needs is present.
    pub fn is_complete(&self) -> bool {
        match self.kind {
            OpKind::Scan => true,
            OpKind::Project => self.ref_cols.is_some(),
            OpKind::Select => self.selectivity.is_some(),
        }
    }

    /// Checks the profile on its own (without table statistics).
    pub fn validate_self(&self) -> Result<()> {
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::InvalidOperation(format!(
                "frequency must be > 0, got {}",
                self.frequency
            )));
        }
        if let Some(sf) = self.selectivity {
            if !(0.0..=1.0).contains(&sf) {
                return Err(Error::InvalidOperation(format!(
                    "selectivity must be in [0, 1], got {sf}"
                )));
            }
        }
        if self.ref_cols == Some(0) {
            return Err(Error::InvalidOperation("ref_cols must be >= 1".into()));
        }
        Ok(())
    }

    pub fn validate(&self, stats: &DataStats) -> Result<()> {
        self.validate_self()?;
        if let Some(r) = self.ref_cols {
            if r > stats.col_count {
                return Err(Error::InvalidOperation(format!(
                    "ref_cols {r} exceeds col_count {}",
                    stats.col_count
                )));
            }
        }
        Ok(())
    }

    fn required_ref_cols(&self, stats: &DataStats) -> Result<u32> {
        self.validate(stats)?;
        self.ref_cols
            .ok_or_else(|| Error::InvalidOperation("projection without ref_cols".into()))
    }

    fn required_selectivity(&self) -> Result<f64> {
        self.validate_self()?;
        self.selectivity
            .ok_or_else(|| Error::InvalidOperation("selection without selectivity".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SizeBreakdown {
    pub header: f64,
    pub body: f64,
    pub footer: f64,
    pub total: f64,
}

impl SizeBreakdown {
    pub fn new(header: f64, body: f64, footer: f64) -> Self {
        Self {
            header,
            body,
            footer,
            total: header + body + footer,
        }
    }
}

pub fn horizontal_body_size(stats: &DataStats, geo: &LayoutGeometry) -> Result<f64> {
    geo.expect(LayoutKind::Horizontal)?;
    Ok((stats.avg_row_size + geo.row_meta) * stats.rows() + geo.body_meta)
}

/// Size of one stored column including its metadata.
pub fn vertical_one_col_size(stats: &DataStats, geo: &LayoutGeometry) -> Result<f64> {
    geo.expect(LayoutKind::Vertical)?;
    Ok(stats.effective_col_size() * stats.rows() + geo.vcol_meta)
}

pub fn vertical_body_size(stats: &DataStats, geo: &LayoutGeometry) -> Result<f64> {
    stats.validate()?;
    Ok(vertical_one_col_size(stats, geo)? * stats.cols())
}

/// Fractional number of row groups. A table without rows writes no groups.
pub fn hybrid_row_groups(stats: &DataStats, geo: &LayoutGeometry) -> Result<f64> {
    geo.expect(LayoutKind::Hybrid)?;
    if stats.row_count == 0 {
        return Ok(0.0);
    }
    Ok((stats.effective_col_size() * stats.rows() + geo.hybrid_col_meta) * stats.cols()
        / geo.rowgroup_size)
}

/// Row-group metadata; partially filled groups still carry full metadata.
pub fn hybrid_meta_size(stats: &DataStats, geo: &LayoutGeometry) -> Result<f64> {
    Ok(ceil_count(hybrid_row_groups(stats, geo)?) * geo.rowgroup_meta)
}

pub fn hybrid_body_size(stats: &DataStats, geo: &LayoutGeometry) -> Result<f64> {
    Ok(hybrid_row_groups(stats, geo)? * geo.rowgroup_size + hybrid_meta_size(stats, geo)?)
}

pub fn total_layout_size(stats: &DataStats, geo: &LayoutGeometry) -> Result<SizeBreakdown> {
    stats.validate()?;
    geo.validate()?;
    let body = match geo.kind {
        LayoutKind::Horizontal => horizontal_body_size(stats, geo)?,
        LayoutKind::Vertical => vertical_body_size(stats, geo)?,
        LayoutKind::Hybrid => hybrid_body_size(stats, geo)?,
    };
    Ok(SizeBreakdown::new(geo.header_size, body, geo.footer_size))
}

/// Probability that a row group holds at least one row matching a predicate
/// of selectivity `sf`, assuming independent rows. Evaluated in log space so
/// that tiny selectivities over large groups keep their precision.
pub fn row_group_hit_probability(sf: f64, rows_per_group: f64) -> f64 {
    if sf <= 0.0 || rows_per_group <= 0.0 {
        return 0.0;
    }
    if sf >= 1.0 {
        return 1.0;
    }
    -(rows_per_group * (-sf).ln_1p()).exp_m1()
}

/// Statistics, geometry and section sizes of one materialized layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayoutModel {
    pub stats: DataStats,
    pub geometry: LayoutGeometry,
    pub sections: SizeBreakdown,
}

impl LayoutModel {
    /// Section sizes from the generic equations.
    pub fn generic(stats: DataStats, geometry: LayoutGeometry) -> Result<Self> {
        let sections = total_layout_size(&stats, &geometry)?;
        Ok(Self {
            stats,
            geometry,
            sections,
        })
    }

    /// Section sizes supplied by a concrete format calculator.
    pub fn with_sections(
        stats: DataStats,
        geometry: LayoutGeometry,
        sections: SizeBreakdown,
    ) -> Result<Self> {
        stats.validate()?;
        geometry.validate()?;
        Ok(Self {
            stats,
            geometry,
            sections,
        })
    }

    pub fn kind(&self) -> LayoutKind {
        self.geometry.kind
    }

    pub fn size(&self) -> f64 {
        self.sections.total
    }

    fn header_footer(&self) -> f64 {
        self.sections.header + self.sections.footer
    }

    pub fn write_cost(&self, sys: &SystemProfile) -> CostEstimate {
        cost::write_cost(self.size(), sys)
    }

    /// Bytes read by a full scan, counting the metadata every task re-reads.
    pub fn scan_size(&self, sys: &SystemProfile) -> f64 {
        self.size() + cost::used_chunks(self.size(), sys) * self.geometry.per_task_meta
    }

    pub fn scan_cost(&self, sys: &SystemProfile) -> CostEstimate {
        CostEstimate::read(
            cost::used_chunks(self.scan_size(sys), sys),
            cost::seeks(self.size(), sys),
            sys,
        )
    }

    pub fn one_col_with_meta(&self) -> Result<f64> {
        vertical_one_col_size(&self.stats, &self.geometry)
    }

    pub fn project_size_vertical(&self, op: &OperationProfile) -> Result<f64> {
        let refs = op.required_ref_cols(&self.stats)?;
        Ok(self.header_footer() + self.one_col_with_meta()? * f64::from(refs))
    }

    /// Each referenced column is stored on its own and pays its own seeks.
    pub fn project_cost_vertical(
        &self,
        op: &OperationProfile,
        sys: &SystemProfile,
    ) -> Result<CostEstimate> {
        let size = self.project_size_vertical(op)?;
        let refs = u64::from(op.required_ref_cols(&self.stats)?);
        let per_col = cost::seeks(self.one_col_with_meta()?, sys);
        Ok(CostEstimate::read(cost::used_chunks(size, sys), refs * per_col, sys))
    }

    pub fn row_groups(&self) -> Result<f64> {
        hybrid_row_groups(&self.stats, &self.geometry)
    }

    /// Metadata of all row groups, re-read by every task of a hybrid read.
    pub fn hybrid_meta(&self) -> Result<f64> {
        hybrid_meta_size(&self.stats, &self.geometry)
    }

    pub fn rows_per_row_group(&self) -> Result<f64> {
        let groups = self.row_groups()?;
        if groups <= 0.0 {
            return Err(Error::EmptyTable);
        }
        Ok(self.stats.rows() / groups)
    }

    /// Bytes of the referenced columns inside one row group.
    pub fn ref_cols_size(&self, op: &OperationProfile) -> Result<f64> {
        let refs = op.required_ref_cols(&self.stats)?;
        Ok(
            (self.stats.effective_col_size() * self.rows_per_row_group()?
                + self.geometry.hybrid_col_meta)
                * f64::from(refs),
        )
    }

    pub fn project_size_hybrid(&self, op: &OperationProfile, sys: &SystemProfile) -> Result<f64> {
        op.required_ref_cols(&self.stats)?;
        let groups = self.row_groups()?;
        let per_group = if groups > 0.0 {
            (self.ref_cols_size(op)? + self.geometry.rowgroup_meta) * groups
        } else {
            0.0
        };
        Ok(self.header_footer()
            + per_group
            + cost::used_chunks(self.size(), sys) * self.hybrid_meta()?)
    }

    /// Seeks follow the whole file, not only the projected bytes.
    pub fn project_cost_hybrid(
        &self,
        op: &OperationProfile,
        sys: &SystemProfile,
    ) -> Result<CostEstimate> {
        let size = self.project_size_hybrid(op, sys)?;
        Ok(CostEstimate::read(
            cost::used_chunks(size, sys),
            cost::seeks(self.size(), sys),
            sys,
        ))
    }

    pub fn selected_rows_size(&self, op: &OperationProfile) -> Result<f64> {
        let sf = op.required_selectivity()?;
        Ok(
            (self.stats.effective_col_size() * sf * self.stats.rows()
                + self.geometry.hybrid_col_meta)
                * self.stats.cols(),
        )
    }

    /// Expected number of row groups a selection has to fetch.
    pub fn selected_row_groups(&self, op: &OperationProfile) -> Result<f64> {
        let sf = op.required_selectivity()?;
        let groups = self.row_groups()?;
        if groups <= 0.0 {
            return Ok(0.0);
        }
        if op.sorted {
            Ok(ceil_count(self.selected_rows_size(op)? / self.geometry.rowgroup_size))
        } else {
            Ok(groups * row_group_hit_probability(sf, self.rows_per_row_group()?))
        }
    }

    pub fn select_size_hybrid(&self, op: &OperationProfile, sys: &SystemProfile) -> Result<f64> {
        // Rounding up to whole groups never fetches more than the file holds.
        let groups = self.selected_row_groups(op)?.min(self.row_groups()?);
        Ok(self.header_footer()
            + groups * self.geometry.rowgroup_size
            + cost::used_chunks(self.size(), sys) * self.hybrid_meta()?)
    }

    pub fn select_cost_hybrid(
        &self,
        op: &OperationProfile,
        sys: &SystemProfile,
    ) -> Result<CostEstimate> {
        let size = self.select_size_hybrid(op, sys)?;
        Ok(CostEstimate::read(
            cost::used_chunks(size, sys),
            cost::seeks(size, sys),
            sys,
        ))
    }

    /// Read cost of one downstream operation. Layouts without native support
    /// for an operation fall back to a full scan.
    pub fn read_cost(&self, op: &OperationProfile, sys: &SystemProfile) -> Result<CostEstimate> {
        op.validate(&self.stats)?;
        match (self.kind(), op.kind) {
            (_, OpKind::Scan) | (LayoutKind::Horizontal, _) => Ok(self.scan_cost(sys)),
            (LayoutKind::Vertical, OpKind::Select) => Ok(self.scan_cost(sys)),
            (LayoutKind::Vertical, OpKind::Project) => self.project_cost_vertical(op, sys),
            (LayoutKind::Hybrid, OpKind::Project) => self.project_cost_hybrid(op, sys),
            (LayoutKind::Hybrid, OpKind::Select) => self.select_cost_hybrid(op, sys),
        }
    }

    /// Bytes fetched by one downstream operation.
    pub fn read_size(&self, op: &OperationProfile, sys: &SystemProfile) -> Result<f64> {
        op.validate(&self.stats)?;
        match (self.kind(), op.kind) {
            (_, OpKind::Scan) | (LayoutKind::Horizontal, _) => Ok(self.scan_size(sys)),
            (LayoutKind::Vertical, OpKind::Select) => Ok(self.scan_size(sys)),
            (LayoutKind::Vertical, OpKind::Project) => self.project_size_vertical(op),
            (LayoutKind::Hybrid, OpKind::Project) => self.project_size_hybrid(op, sys),
            (LayoutKind::Hybrid, OpKind::Select) => self.select_size_hybrid(op, sys),
        }
    }
}

pub fn scan_size(stats: &DataStats, geo: &LayoutGeometry, sys: &SystemProfile) -> Result<f64> {
    Ok(LayoutModel::generic(*stats, *geo)?.scan_size(sys))
}

pub fn scan_cost(
    stats: &DataStats,
    geo: &LayoutGeometry,
    sys: &SystemProfile,
) -> Result<CostEstimate> {
    Ok(LayoutModel::generic(*stats, *geo)?.scan_cost(sys))
}

pub fn read_cost(
    op: &OperationProfile,
    stats: &DataStats,
    geo: &LayoutGeometry,
    sys: &SystemProfile,
) -> Result<CostEstimate> {
    LayoutModel::generic(*stats, *geo)?.read_cost(op, sys)
}

pub fn write_cost(stats: &DataStats, geo: &LayoutGeometry, sys: &SystemProfile) -> Result<CostEstimate> {
    Ok(cost::write_cost(total_layout_size(stats, geo)?.total, sys))
}
