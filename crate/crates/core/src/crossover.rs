//! Where a row layout starts to beat a hybrid one as projections widen.

use serde::{Deserialize, Serialize};

use crate::cost::SystemProfile;
use crate::error::{Error, Result};
use crate::formats::{FormatDescriptor, FormatName};
use crate::layout::{DataStats, LayoutKind, OperationProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPoint {
    pub ref_cols: u32,
    /// `ref_cols / col_count`.
    pub fraction: f64,
    /// Share of the hybrid file's bytes the projection reads.
    pub hybrid_bytes_fraction: f64,
    pub horizontal_cost: f64,
    pub hybrid_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverReport {
    pub stats: DataStats,
    pub horizontal: FormatName,
    pub hybrid: FormatName,
    pub points: Vec<CrossoverPoint>,
    /// Column fractions where the cheaper format flips, interpolated
    /// linearly between neighbouring points.
    pub crossovers: Vec<f64>,
}

impl CrossoverReport {
    /// The single crossover, when there is exactly one.
    pub fn unique_crossover(&self) -> Option<f64> {
        match self.crossovers.as_slice() {
            [x] => Some(*x),
            _ => None,
        }
    }
}

/// Projection cost of both layouts for every width from one column to all.
pub fn crossover(
    stats: &DataStats,
    horizontal: &FormatDescriptor,
    hybrid: &FormatDescriptor,
    sys: &SystemProfile,
) -> Result<CrossoverReport> {
    for (fd, want) in [(horizontal, LayoutKind::Horizontal), (hybrid, LayoutKind::Hybrid)] {
        if fd.kind() != want {
            return Err(Error::KindMismatch {
                expected: want,
                found: fd.kind(),
            });
        }
    }
    let row = horizontal.layout(stats)?;
    let hyb = hybrid.layout(stats)?;
    let cols = stats.col_count;
    let points = (1..=cols)
        .map(|r| {
            let op = OperationProfile::project(r);
            Ok(CrossoverPoint {
                ref_cols: r,
                fraction: f64::from(r) / f64::from(cols),
                hybrid_bytes_fraction: hyb.read_size(&op, sys)? / hyb.size(),
                horizontal_cost: row.read_cost(&op, sys)?.weighted_cost,
                hybrid_cost: hyb.read_cost(&op, sys)?.weighted_cost,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossoverReport {
        stats: *stats,
        horizontal: horizontal.name(),
        hybrid: hybrid.name(),
        crossovers: sign_changes(&points),
        points,
    })
}

fn sign_changes(points: &[CrossoverPoint]) -> Vec<f64> {
    let diff = |p: &CrossoverPoint| p.horizontal_cost - p.hybrid_cost;
    let mut out = Vec::new();
    let mut last: Option<&CrossoverPoint> = None;
    for p in points {
        let d = diff(p);
        if d == 0.0 {
            continue;
        }
        if let Some(prev) = last {
            let dp = diff(prev);
            if dp.signum() != d.signum() {
                let t = dp / (dp - d);
                out.push(prev.fraction + t * (p.fraction - prev.fraction));
            }
        }
        last = Some(p);
    }
    out
}
