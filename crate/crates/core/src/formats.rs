//! Concrete storage formats: byte constants, section-size calculators and
//! the mapping of each format onto a generic [`LayoutGeometry`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::ceil_count;
use crate::error::{Error, Result};
use crate::layout::{DataStats, LayoutGeometry, LayoutKind, LayoutModel, SizeBreakdown};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatName {
    SeqFile,
    Avro,
    Parquet,
    Vertical,
}

impl FormatName {
    pub const ALL: [FormatName; 4] = [
        FormatName::SeqFile,
        FormatName::Avro,
        FormatName::Parquet,
        FormatName::Vertical,
    ];

    /// The three formats with a real-world counterpart.
    pub const STANDARD: [FormatName; 3] =
        [FormatName::SeqFile, FormatName::Avro, FormatName::Parquet];

    pub fn as_str(self) -> &'static str {
        match self {
            FormatName::SeqFile => "seqfile",
            FormatName::Avro => "avro",
            FormatName::Parquet => "parquet",
            FormatName::Vertical => "vertical",
        }
    }

    pub fn kind(self) -> LayoutKind {
        match self {
            FormatName::SeqFile | FormatName::Avro => LayoutKind::Horizontal,
            FormatName::Vertical => LayoutKind::Vertical,
            FormatName::Parquet => LayoutKind::Hybrid,
        }
    }

    /// How many downstream operations the layout serves natively.
    pub fn richness(self) -> u8 {
        match self.kind() {
            LayoutKind::Horizontal => 0,
            LayoutKind::Vertical => 1,
            LayoutKind::Hybrid => 2,
        }
    }

    /// Tie-break order among equal costs; higher wins.
    pub fn preference(self) -> u8 {
        match self {
            FormatName::Parquet => 3,
            FormatName::Vertical => 2,
            FormatName::Avro => 1,
            FormatName::SeqFile => 0,
        }
    }
}

impl fmt::Display for FormatName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "seqfile" | "sequencefile" | "seq" => Ok(FormatName::SeqFile),
            "avro" => Ok(FormatName::Avro),
            "parquet" => Ok(FormatName::Parquet),
            "vertical" => Ok(FormatName::Vertical),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeqFileConstants {
    pub header: f64,
    pub record_length: f64,
    pub key_length: f64,
    pub col_separator: f64,
    pub sync_marker: f64,
    pub sync_block: f64,
    pub footer: f64,
}

impl Default for SeqFileConstants {
    fn default() -> Self {
        Self {
            header: 30.0,
            record_length: 4.0,
            key_length: 4.0,
            col_separator: 1.0,
            sync_marker: 16.0,
            sync_block: 2000.0,
            footer: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvroConstants {
    pub version: f64,
    pub codec: f64,
    pub sync_marker: f64,
    pub col_schema: f64,
    pub block: f64,
    pub row_meta: f64,
    pub block_meta: f64,
    pub footer: f64,
}

impl Default for AvroConstants {
    fn default() -> Self {
        Self {
            version: 5.0,
            codec: 4.0,
            sync_marker: 16.0,
            col_schema: 30.0,
            block: 4000.0,
            row_meta: 8.0,
            block_meta: 8.0,
            footer: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParquetConstants {
    pub header: f64,
    pub definition_level: f64,
    pub repetition_level: f64,
    pub row_counter: f64,
    pub sync_marker: f64,
    pub version: f64,
    pub col_schema: f64,
    pub col_stats_meta: f64,
    pub magic: f64,
    pub footer_length: f64,
    pub row_group: f64,
    pub page: f64,
}

impl Default for ParquetConstants {
    fn default() -> Self {
        Self {
            header: 4.0,
            definition_level: 4.0,
            repetition_level: 4.0,
            row_counter: 8.0,
            sync_marker: 16.0,
            version: 4.0,
            col_schema: 30.0,
            col_stats_meta: 40.0,
            magic: 4.0,
            footer_length: 4.0,
            row_group: 1.28e8,
            page: 1.05e6,
        }
    }
}

/// A minimal column store: one file per column with a marker after each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerticalConstants {
    pub header: f64,
    pub footer: f64,
    pub col_separator: f64,
}

impl Default for VerticalConstants {
    fn default() -> Self {
        Self {
            header: 16.0,
            footer: 0.0,
            col_separator: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum FormatDescriptor {
    SeqFile(SeqFileConstants),
    Avro(AvroConstants),
    Parquet(ParquetConstants),
    Vertical(VerticalConstants),
}

/// Parquet quantities derived from the statistics of one table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParquetShape {
    pub row_groups: f64,
    pub rows_per_group: f64,
    pub pages_per_group: f64,
}

impl FormatDescriptor {
    pub fn default_for(name: FormatName) -> Self {
        match name {
            FormatName::SeqFile => FormatDescriptor::SeqFile(SeqFileConstants::default()),
            FormatName::Avro => FormatDescriptor::Avro(AvroConstants::default()),
            FormatName::Parquet => FormatDescriptor::Parquet(ParquetConstants::default()),
            FormatName::Vertical => FormatDescriptor::Vertical(VerticalConstants::default()),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Self::default_for(name.parse()?))
    }

    /// Row-group and page sizes divided by `factor`, to pair with a
    /// desk-scaled system profile. Other formats are unchanged.
    pub fn desk_scaled(&self, factor: f64) -> Result<Self> {
        let mut fd = *self;
        if let FormatDescriptor::Parquet(c) = &mut fd {
            c.row_group /= factor;
            c.page /= factor;
        }
        fd.validate()?;
        Ok(fd)
    }

    pub fn name(&self) -> FormatName {
        match self {
            FormatDescriptor::SeqFile(_) => FormatName::SeqFile,
            FormatDescriptor::Avro(_) => FormatName::Avro,
            FormatDescriptor::Parquet(_) => FormatName::Parquet,
            FormatDescriptor::Vertical(_) => FormatName::Vertical,
        }
    }

    pub fn kind(&self) -> LayoutKind {
        self.name().kind()
    }

    /// Every byte constant of the format by name.
    pub fn constants(&self) -> BTreeMap<&'static str, f64> {
        let pairs: Vec<(&'static str, f64)> = match self {
            FormatDescriptor::SeqFile(c) => vec![
                ("header", c.header),
                ("record_length", c.record_length),
                ("key_length", c.key_length),
                ("col_separator", c.col_separator),
                ("sync_marker", c.sync_marker),
                ("sync_block", c.sync_block),
                ("footer", c.footer),
            ],
            FormatDescriptor::Avro(c) => vec![
                ("version", c.version),
                ("codec", c.codec),
                ("sync_marker", c.sync_marker),
                ("col_schema", c.col_schema),
                ("block", c.block),
                ("row_meta", c.row_meta),
                ("block_meta", c.block_meta),
                ("footer", c.footer),
            ],
            FormatDescriptor::Parquet(c) => vec![
                ("header", c.header),
                ("definition_level", c.definition_level),
                ("repetition_level", c.repetition_level),
                ("row_counter", c.row_counter),
                ("sync_marker", c.sync_marker),
                ("version", c.version),
                ("col_schema", c.col_schema),
                ("col_stats_meta", c.col_stats_meta),
                ("magic", c.magic),
                ("footer_length", c.footer_length),
                ("row_group", c.row_group),
                ("page", c.page),
            ],
            FormatDescriptor::Vertical(c) => vec![
                ("header", c.header),
                ("footer", c.footer),
                ("col_separator", c.col_separator),
            ],
        };
        pairs.into_iter().collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in self.constants() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "{} constant {key} must be >= 0, got {v}",
                    self.name()
                )));
            }
        }
        let positive = match self {
            FormatDescriptor::SeqFile(c) => vec![("sync_block", c.sync_block)],
            FormatDescriptor::Avro(c) => vec![("block", c.block)],
            FormatDescriptor::Parquet(c) => vec![("row_group", c.row_group), ("page", c.page)],
            FormatDescriptor::Vertical(_) => vec![],
        };
        for (key, v) in positive {
            if v <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "{} constant {key} must be > 0",
                    self.name()
                )));
            }
        }
        Ok(())
    }

    pub fn sections(&self, stats: &DataStats) -> Result<SizeBreakdown> {
        self.validate()?;
        stats.validate()?;
        Ok(match self {
            FormatDescriptor::SeqFile(c) => seqfile_sections(stats, c),
            FormatDescriptor::Avro(c) => avro_sections(stats, c),
            FormatDescriptor::Parquet(c) => parquet_sections(stats, c),
            FormatDescriptor::Vertical(c) => vertical_sections(stats, c),
        })
    }

    /// The format expressed through the generic layout variables. Some
    /// metadata depends on the data (sync markers, page levels), hence the
    /// statistics argument.
    pub fn as_geometry(&self, stats: &DataStats) -> Result<LayoutGeometry> {
        self.validate()?;
        stats.validate()?;
        let geo = match self {
            FormatDescriptor::SeqFile(c) => LayoutGeometry {
                header_size: c.header,
                footer_size: c.footer,
                per_task_meta: c.header + c.footer,
                row_meta: seqfile_row_overhead(stats, c),
                body_meta: seqfile_sync_overhead(stats, c),
                ..LayoutGeometry::of_kind(LayoutKind::Horizontal)
            },
            FormatDescriptor::Avro(c) => {
                let header = avro_header(stats, c);
                LayoutGeometry {
                    header_size: header,
                    footer_size: c.footer,
                    per_task_meta: header + c.footer,
                    row_meta: c.row_meta,
                    body_meta: avro_block_overhead(stats, c),
                    ..LayoutGeometry::of_kind(LayoutKind::Horizontal)
                }
            }
            FormatDescriptor::Parquet(c) => {
                let shape = parquet_shape(stats, c);
                let footer = parquet_footer(stats, c, &shape);
                LayoutGeometry {
                    header_size: c.header,
                    footer_size: footer,
                    per_task_meta: footer + c.header,
                    hybrid_col_meta: c.sync_marker,
                    rowgroup_meta: c.row_counter
                        + c.sync_marker
                        + (c.definition_level + c.repetition_level) * shape.pages_per_group,
                    rowgroup_size: c.row_group,
                    ..LayoutGeometry::of_kind(LayoutKind::Hybrid)
                }
            }
            FormatDescriptor::Vertical(c) => LayoutGeometry {
                header_size: c.header,
                footer_size: c.footer,
                per_task_meta: c.header + c.footer,
                vcol_meta: c.col_separator,
                ..LayoutGeometry::of_kind(LayoutKind::Vertical)
            },
        };
        geo.validate()?;
        Ok(geo)
    }

    /// Cost model of this format for a table: concrete section sizes plus
    /// the generic geometry for the read equations.
    pub fn layout(&self, stats: &DataStats) -> Result<LayoutModel> {
        let sections = self.sections(stats)?;
        let geometry = self.as_geometry(stats)?;
        LayoutModel::with_sections(*stats, geometry, sections)
    }

    pub fn parquet_shape(&self, stats: &DataStats) -> Result<ParquetShape> {
        match self {
            FormatDescriptor::Parquet(c) => {
                stats.validate()?;
                Ok(parquet_shape(stats, c))
            }
            other => Err(Error::KindMismatch {
                expected: LayoutKind::Hybrid,
                found: other.kind(),
            }),
        }
    }
}

fn seqfile_separators(stats: &DataStats) -> f64 {
    if stats.col_count < 2 {
        log::warn!(
            "seqfile table with {} column(s): separator count clamped to 0",
            stats.col_count
        );
    }
    f64::from(stats.col_count.saturating_sub(2))
}

/// Stored bytes per row beyond the raw payload.
fn seqfile_row_overhead(stats: &DataStats, c: &SeqFileConstants) -> f64 {
    c.record_length
        + c.key_length
        + c.col_separator * seqfile_separators(stats)
        + (stats.effective_col_size() - stats.avg_col_size) * stats.cols()
}

pub fn seqfile_row_size(stats: &DataStats, c: &SeqFileConstants) -> f64 {
    c.record_length
        + c.key_length
        + stats.effective_col_size() * stats.cols()
        + c.col_separator * seqfile_separators(stats)
}

fn seqfile_sync_overhead(stats: &DataStats, c: &SeqFileConstants) -> f64 {
    let rows_bytes = seqfile_row_size(stats, c) * stats.rows();
    ceil_count(rows_bytes / c.sync_block) * c.sync_marker
}

pub fn seqfile_sections(stats: &DataStats, c: &SeqFileConstants) -> SizeBreakdown {
    let rows_bytes = seqfile_row_size(stats, c) * stats.rows();
    SizeBreakdown::new(
        c.header,
        rows_bytes + seqfile_sync_overhead(stats, c),
        c.footer,
    )
}

pub fn avro_header(stats: &DataStats, c: &AvroConstants) -> f64 {
    c.version + stats.cols() * c.col_schema + c.codec + c.sync_marker
}

fn avro_rows_bytes(stats: &DataStats, c: &AvroConstants) -> f64 {
    (stats.avg_row_size + c.row_meta) * stats.rows()
}

fn avro_block_overhead(stats: &DataStats, c: &AvroConstants) -> f64 {
    (c.block_meta + c.sync_marker) * ceil_count(avro_rows_bytes(stats, c) / c.block)
}

pub fn avro_sections(stats: &DataStats, c: &AvroConstants) -> SizeBreakdown {
    SizeBreakdown::new(
        avro_header(stats, c),
        avro_rows_bytes(stats, c) + avro_block_overhead(stats, c),
        c.footer,
    )
}

fn parquet_shape(stats: &DataStats, c: &ParquetConstants) -> ParquetShape {
    if stats.row_count == 0 {
        return ParquetShape {
            row_groups: 0.0,
            rows_per_group: 0.0,
            pages_per_group: 0.0,
        };
    }
    let col = stats.effective_col_size();
    let row_groups = (col * stats.rows() + c.sync_marker) * stats.cols() / c.row_group;
    let rows_per_group = stats.rows() / row_groups;
    ParquetShape {
        row_groups,
        rows_per_group,
        pages_per_group: (col * rows_per_group + c.sync_marker) * stats.cols() / c.page,
    }
}

fn parquet_footer(stats: &DataStats, c: &ParquetConstants, shape: &ParquetShape) -> f64 {
    c.version
        + c.col_schema * stats.cols()
        + c.magic
        + c.footer_length
        + shape.row_groups * c.col_stats_meta * (1.0 + shape.pages_per_group)
}

pub fn parquet_sections(stats: &DataStats, c: &ParquetConstants) -> SizeBreakdown {
    let shape = parquet_shape(stats, c);
    let body = ((c.definition_level + c.repetition_level + c.page) * shape.pages_per_group
        + c.row_counter
        + c.sync_marker)
        * shape.row_groups;
    SizeBreakdown::new(c.header, body, parquet_footer(stats, c, &shape))
}

pub fn vertical_sections(stats: &DataStats, c: &VerticalConstants) -> SizeBreakdown {
    let one_col = stats.effective_col_size() * stats.rows() + c.col_separator;
    SizeBreakdown::new(c.header, one_col * stats.cols(), c.footer)
}
