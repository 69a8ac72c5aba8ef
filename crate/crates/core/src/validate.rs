//! Validation suites comparing the cost model against the reference
//! oracles: writer byte accounting, simulated selections, Monte Carlo hit
//! rates and replayed I/O.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{ProfileParams, SystemProfile};
use crate::error::Result;
use crate::formats::{FormatDescriptor, FormatName};
use crate::layout::{row_group_hit_probability, DataStats, OpKind, OperationProfile};
use crate::oracle::{
    access_plan, monte_carlo_rg_hit, replay_io, write_reference_files, ColumnSpec, ReferenceFile,
    SyntheticTable,
};

pub const SIZE_TOLERANCE_PCT: f64 = 5.0;
pub const PROJECTION_TOLERANCE_PCT: f64 = 5.0;
pub const SELECTION_TOLERANCE_PCT: f64 = 6.0;
pub const HIT_PROBABILITY_TOLERANCE: f64 = 0.01;
pub const ORDERING_MIN_AGREEMENT: f64 = 0.95;
pub const ORDERING_MIN_AGREEMENT_EXACT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub seed: u64,
    /// Smaller sweeps for a fast smoke run.
    pub quick: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            quick: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub suite: String,
    pub parameter: String,
    pub estimated: f64,
    pub actual: f64,
    /// `(estimated - actual) / actual` in percent, or the absolute
    /// difference where the quantity is a probability.
    pub error: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub tolerance: String,
    pub passed: bool,
    pub points: usize,
    pub failures: usize,
    /// Largest absolute error, or the agreement rate for ordering suites.
    pub metric: f64,
    /// Ordering suites: agreement when no pair counts as tied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict_agreement: Option<f64>,
    pub details: Vec<ValidationPoint>,
}

impl SuiteReport {
    fn from_points(name: &str, tolerance: String, details: Vec<ValidationPoint>) -> Self {
        let failures = details.iter().filter(|p| !p.passed).count();
        let metric = details
            .iter()
            .filter_map(|p| p.error)
            .fold(0.0_f64, |m, e| m.max(e.abs()));
        Self {
            name: name.to_string(),
            tolerance,
            passed: failures == 0,
            points: details.len(),
            failures,
            metric,
            strict_agreement: None,
            details,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub quick: bool,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

impl ValidationReport {
    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn points(&self) -> impl Iterator<Item = &ValidationPoint> {
        self.suites.iter().flat_map(|s| s.details.iter())
    }
}

pub fn run_validation(cfg: &ValidationConfig) -> Result<ValidationReport> {
    let suites = vec![
        size_suite(cfg)?,
        projection_suite(cfg)?,
        selection_suite(cfg)?,
        hit_probability_suite(cfg),
        ordering_suite(cfg, false)?,
        ordering_suite(cfg, true)?,
    ];
    Ok(ValidationReport {
        seed: cfg.seed,
        quick: cfg.quick,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

fn pct(estimated: f64, actual: f64) -> f64 {
    if actual == 0.0 {
        if estimated == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (estimated - actual) / actual * 100.0
    }
}

fn point(suite: &str, parameter: String, estimated: f64, actual: f64, tol_pct: f64) -> ValidationPoint {
    let e = pct(estimated, actual);
    ValidationPoint {
        suite: suite.to_string(),
        parameter,
        estimated,
        actual,
        error: Some(e),
        passed: e.abs() <= tol_pct,
    }
}

fn exact_point(suite: &str, parameter: String, estimated: f64, actual: f64) -> ValidationPoint {
    ValidationPoint {
        suite: suite.to_string(),
        parameter,
        estimated,
        actual,
        error: Some(pct(estimated, actual)),
        passed: estimated.to_bits() == actual.to_bits(),
    }
}

fn descriptors(names: &[FormatName]) -> Vec<FormatDescriptor> {
    names.iter().map(|&n| FormatDescriptor::default_for(n)).collect()
}

/// Column layouts of the size sweep, keyed by column count. Variable-length
/// columns never exceed half of a table.
pub fn size_sweep_columns(cols: usize) -> Vec<ColumnSpec> {
    (0..cols)
        .map(|i| match i % 4 {
            0 => ColumnSpec::fixed(8),
            1 => ColumnSpec::varlen(20 + (i as u32 % 3) * 10),
            2 => ColumnSpec::fixed(4),
            _ => {
                if i % 8 == 3 {
                    ColumnSpec::varlen(32)
                } else {
                    ColumnSpec::fixed(8)
                }
            }
        })
        .collect()
}

fn size_sweep_tables(cfg: &ValidationConfig) -> Vec<SyntheticTable> {
    let rows: &[u64] = if cfg.quick {
        &[1_000, 10_000, 100_000]
    } else {
        &[1_000, 10_000, 100_000, 1_000_000]
    };
    let mut tables = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        for (j, cols) in [4usize, 12, 30].into_iter().enumerate() {
            let seed = cfg.seed ^ ((i * 8 + j) as u64);
            tables.push(SyntheticTable::new(r, size_sweep_columns(cols), seed));
        }
    }
    let big = if cfg.quick { 1_000_000 } else { 10_000_000 };
    tables.push(SyntheticTable::new(big, size_sweep_columns(8), cfg.seed ^ 0xb16));
    tables
}

/// Estimated total size from collected statistics against the bytes the
/// reference writer emits.
pub fn size_suite(cfg: &ValidationConfig) -> Result<SuiteReport> {
    let fds = descriptors(&FormatName::STANDARD);
    let tables = size_sweep_tables(cfg);
    let per_table = tables
        .par_iter()
        .map(|t| {
            let (stats, files) = write_reference_files(t, &fds)?;
            fds.iter()
                .zip(&files)
                .map(|(fd, f)| {
                    Ok(point(
                        "size",
                        format!("{} rows={} cols={}", fd.name(), t.row_count, t.cols()),
                        fd.sections(&stats)?.total,
                        f.total() as f64,
                        SIZE_TOLERANCE_PCT,
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::from_points(
        "size",
        format!("|error| <= {SIZE_TOLERANCE_PCT}%"),
        per_table.into_iter().flatten().collect(),
    ))
}

/// A wide join result: 14 fixed and 11 variable-length columns.
pub fn wide_table_columns() -> Vec<ColumnSpec> {
    let f = ColumnSpec::fixed;
    let v = ColumnSpec::varlen;
    vec![
        f(8), f(8), f(8), f(4), f(8), f(8), f(8), f(8), v(2), v(2), f(4), f(4), f(4), v(12), v(8),
        v(28), f(8), v(32), v(14), v(8), v(22), f(4), v(8), f(8), v(14),
    ]
}

fn mean_plan_bytes(
    op: &OperationProfile,
    file: &ReferenceFile,
    sys: &SystemProfile,
    seeds: impl Iterator<Item = u64>,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0.0;
    for s in seeds {
        sum += access_plan(op, file, sys, s)?.total_bytes() as f64;
        n += 1.0;
    }
    Ok(sum / n)
}

/// Projection reads of the hybrid layout against the bytes of the column
/// chunks the reference file holds, averaged over random column subsets.
/// Horizontal layouts must estimate a projection exactly like a scan.
pub fn projection_suite(cfg: &ValidationConfig) -> Result<SuiteReport> {
    let rows = if cfg.quick { 200_000 } else { 1_000_000 };
    let subsets = 100;
    let sys = SystemProfile::default();
    let table = SyntheticTable::new(rows, wide_table_columns(), cfg.seed);
    let fds = descriptors(&FormatName::STANDARD);
    let (stats, files) = write_reference_files(&table, &fds)?;
    let cols = stats.col_count;
    let mut details = Vec::new();
    for (fd, file) in fds.iter().zip(&files) {
        let model = fd.layout(&stats)?;
        for refs in 5..=cols {
            let op = OperationProfile::project(refs);
            match fd.name() {
                FormatName::Parquet => {
                    let seeds = (0..subsets).map(|i| cfg.seed.wrapping_add(i));
                    details.push(point(
                        "projection",
                        format!("{} ref_cols={refs}/{cols}", fd.name()),
                        model.read_size(&op, &sys)?,
                        mean_plan_bytes(&op, file, &sys, seeds)?,
                        PROJECTION_TOLERANCE_PCT,
                    ));
                }
                _ => {
                    let scan = OperationProfile::scan();
                    details.push(exact_point(
                        "projection",
                        format!("{} ref_cols={refs}/{cols} vs scan", fd.name()),
                        model.read_cost(&op, &sys)?.weighted_cost,
                        model.read_cost(&scan, &sys)?.weighted_cost,
                    ));
                }
            }
        }
    }
    Ok(SuiteReport::from_points(
        "projection",
        format!("hybrid |error| <= {PROJECTION_TOLERANCE_PCT}%; horizontal identical to scan"),
        details,
    ))
}

pub const SELECTION_SWEEP: [f64; 8] = [1e-6, 1e-5, 1e-4, 1e-3, 0.01, 0.1, 0.19, 0.5];

/// Fewest expected matching rows a quick selection point may have.
pub const QUICK_MIN_MATCHES: f64 = 10.0;

/// Selection reads of the hybrid layout against the row groups a simulated
/// predicate actually hits; unsorted placements are averaged over trials.
/// Other layouts must estimate a selection exactly like a scan.
pub fn selection_suite(cfg: &ValidationConfig) -> Result<SuiteReport> {
    // Quick runs shrink the table, chunks and row groups alike.
    let scale = if cfg.quick { 10.0 } else { 1.0 };
    let rows = (13_000_000.0 / scale) as u64;
    let trials = 40;
    let sys = SystemProfile::default().desk_scaled(scale)?;
    let table = SyntheticTable::uniform(rows, 8, 8, cfg.seed).with_sort_key(0);
    let fds = descriptors(&FormatName::ALL)
        .iter()
        .map(|fd| fd.desk_scaled(scale))
        .collect::<Result<Vec<_>>>()?;
    let (stats, files) = write_reference_files(&table, &fds)?;
    let mut details = Vec::new();
    for (fd, file) in fds.iter().zip(&files) {
        let model = fd.layout(&stats)?;
        // A quick table is too small for the rarest predicates to match
        // more than a row or two.
        let sweep = SELECTION_SWEEP
            .into_iter()
            .filter(|&sf| !cfg.quick || sf * rows as f64 >= QUICK_MIN_MATCHES);
        for sf in sweep {
            for sorted in [true, false] {
                let op = OperationProfile::select(sf, sorted);
                let label = format!(
                    "{} sf={sf} {}",
                    fd.name(),
                    if sorted { "sorted" } else { "unsorted" }
                );
                if fd.name() == FormatName::Parquet {
                    let n = if sorted { 1 } else { trials };
                    let seeds = (0..n).map(|i| cfg.seed.wrapping_add(1000 + i));
                    details.push(point(
                        "selection",
                        label,
                        model.read_size(&op, &sys)?,
                        mean_plan_bytes(&op, file, &sys, seeds)?,
                        SELECTION_TOLERANCE_PCT,
                    ));
                } else {
                    details.push(exact_point(
                        "selection",
                        label + " vs scan",
                        model.read_cost(&op, &sys)?.weighted_cost,
                        model.read_cost(&OperationProfile::scan(), &sys)?.weighted_cost,
                    ));
                }
            }
        }
    }
    Ok(SuiteReport::from_points(
        "selection",
        format!("hybrid |error| <= {SELECTION_TOLERANCE_PCT}%; other layouts identical to scan"),
        details,
    ))
}

pub const HIT_SF_GRID: [f64; 5] = [1e-5, 1e-3, 0.1, 0.19, 0.92];
pub const HIT_ROWS_GRID: [u64; 5] = [10, 100, 1_000, 10_000, 100_000];
pub const HIT_GROUPS: u64 = 100;

/// Row-group hit probability against a Monte Carlo placement of matches.
pub fn hit_probability_suite(cfg: &ValidationConfig) -> SuiteReport {
    let trials = if cfg.quick { 10_000 } else { 100_000 };
    let mut details = Vec::new();
    for sf in HIT_SF_GRID {
        for rpg in HIT_ROWS_GRID {
            let analytic = row_group_hit_probability(sf, rpg as f64);
            let mc = monte_carlo_rg_hit(rpg, HIT_GROUPS, sf, trials, cfg.seed);
            let diff = analytic - mc;
            details.push(ValidationPoint {
                suite: "hit_probability".into(),
                parameter: format!("sf={sf} rows_per_group={rpg}"),
                estimated: analytic,
                actual: mc,
                error: Some(diff),
                passed: diff.abs() <= HIT_PROBABILITY_TOLERANCE,
            });
        }
    }
    SuiteReport::from_points(
        "hit_probability",
        format!("|analytic - monte carlo| <= {HIT_PROBABILITY_TOLERANCE}"),
        details,
    )
}

/// Scale factor of the ordering experiments: chunk, seek, row-group and
/// page sizes shrink together with the tables.
pub const ORDERING_SCALE: f64 = 10.0;

/// Replays per case and format: column subsets, match placements and
/// locality draws vary between them and the seconds are averaged.
pub const ORDERING_PLACEMENTS: u64 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCase {
    pub table: SyntheticTable,
    pub operation: OperationProfile,
}

/// Random tables and operations for the ordering experiments.
pub fn ordering_cases(cfg: &ValidationConfig) -> Vec<OrderingCase> {
    let n = if cfg.quick { 60 } else { 200 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(7);
    (0..n)
        .map(|i| {
            let rows = 10f64.powf(rng.random_range(4.0..6.0)).round() as u64;
            let cols = rng.random_range(4..=30usize);
            let varlen = rng.random_range(0..=cols / 2);
            let mut columns: Vec<ColumnSpec> = (0..cols)
                .map(|_| ColumnSpec::fixed(if rng.random_bool(0.5) { 4 } else { 8 }))
                .collect();
            for c in columns.iter_mut().take(varlen) {
                *c = ColumnSpec::varlen(rng.random_range(12..=40));
            }
            let operation = match rng.random_range(0..3) {
                0 => OperationProfile::scan(),
                1 => OperationProfile::project(rng.random_range(1..=cols as u32)),
                _ => OperationProfile::select(
                    10f64.powf(rng.random_range(-4.0..0.0)),
                    rng.random_bool(0.5),
                ),
            };
            OrderingCase {
                table: SyntheticTable::new(rows, columns, cfg.seed.wrapping_add(i)),
                operation,
            }
        })
        .collect()
}

fn ordering_profile(exact: bool) -> Result<SystemProfile> {
    let params = if exact {
        ProfileParams {
            replication_factor: 1,
            locality_probability: 1.0,
            ..ProfileParams::default()
        }
    } else {
        ProfileParams::default()
    };
    SystemProfile::new(params)?.desk_scaled(ORDERING_SCALE)
}

/// Relative gap under which two simulated timings count as tied. Sits just
/// above the largest error of the size suite (Avro value-length prefixes
/// the row formula leaves out), below which no estimate can order a pair.
pub const ORDERING_TIE_BAND: f64 = 0.03;

/// Whether every pair of formats is ordered the same way by both lists.
/// Pairs whose `truth` values lie within `tie_band` of each other may be
/// ordered either way.
pub fn same_order(estimated: &[f64], truth: &[f64], tie_band: f64) -> bool {
    for i in 0..estimated.len() {
        for j in i + 1..estimated.len() {
            let (a, b) = (truth[i], truth[j]);
            if (a - b).abs() <= tie_band * a.abs().max(b.abs()) && tie_band > 0.0 {
                continue;
            }
            if estimated[i].total_cmp(&estimated[j]) != a.total_cmp(&b) {
                return false;
            }
        }
    }
    true
}

/// Whether ranking the formats by estimated read cost agrees with ranking
/// them by replayed seconds. `exact` uses full locality and a single replica,
/// where only the data layout differs between the two.
pub fn ordering_suite(cfg: &ValidationConfig, exact: bool) -> Result<SuiteReport> {
    let sys = ordering_profile(exact)?;
    let fds = FormatName::STANDARD
        .iter()
        .map(|&n| FormatDescriptor::default_for(n).desk_scaled(ORDERING_SCALE))
        .collect::<Result<Vec<_>>>()?;
    let name = if exact { "ordering_exact" } else { "ordering" };
    let cases = ordering_cases(cfg);
    let outcomes = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| {
            let (stats, files) = write_reference_files(&case.table, &fds)?;
            let op = clamp_op(case.operation, &stats);
            let mut est = Vec::new();
            let mut sim = Vec::new();
            for (fd, file) in fds.iter().zip(&files) {
                est.push(fd.layout(&stats)?.read_cost(&op, &sys)?.weighted_cost);
                let mut seconds = 0.0;
                for k in 0..ORDERING_PLACEMENTS {
                    let seed = cfg.seed.wrapping_add(i as u64 * ORDERING_PLACEMENTS + k);
                    seconds += replay_io(&access_plan(&op, file, &sys, seed)?, &sys, seed);
                }
                sim.push(seconds / ORDERING_PLACEMENTS as f64);
            }
            let agree = same_order(&est, &sim, ORDERING_TIE_BAND);
            let strict = same_order(&est, &sim, 0.0);
            let label = format!(
                "case {i}: rows={} cols={} varlen={} {}",
                stats.row_count,
                stats.col_count,
                stats.varlen_col_count,
                crate::selector::describe_op(&op)
            );
            let points = fds
                .iter()
                .zip(est.iter().zip(&sim))
                .map(|(fd, (&e, &s))| ValidationPoint {
                    suite: name.into(),
                    parameter: format!("{label} {}", fd.name()),
                    estimated: e,
                    actual: s,
                    error: None,
                    passed: agree,
                })
                .collect::<Vec<_>>();
            Ok((points, strict))
        })
        .collect::<Result<Vec<_>>>()?;
    let total = outcomes.len();
    let agreeing = outcomes.iter().filter(|(o, _)| o.iter().all(|p| p.passed)).count();
    let strict = outcomes.iter().filter(|(_, s)| *s).count() as f64 / total as f64;
    let rate = agreeing as f64 / total as f64;
    let need = if exact {
        ORDERING_MIN_AGREEMENT_EXACT
    } else {
        ORDERING_MIN_AGREEMENT
    };
    let details: Vec<_> = outcomes.into_iter().flat_map(|(o, _)| o).collect();
    Ok(SuiteReport {
        name: name.into(),
        tolerance: format!(
            "agreement >= {:.0}% with ties within {:.0}%",
            need * 100.0,
            ORDERING_TIE_BAND * 100.0
        ),
        passed: rate >= need,
        points: total,
        failures: total - agreeing,
        metric: rate,
        strict_agreement: Some(strict),
        details,
    })
}

fn clamp_op(mut op: OperationProfile, stats: &DataStats) -> OperationProfile {
    if op.kind == OpKind::Project {
        op.ref_cols = op.ref_cols.map(|r| r.min(stats.col_count));
    }
    op
}
