//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use formatsel_core::crossover::CrossoverReport;
use formatsel_core::fixtures::{decision_sweep, tpcds_catalog, tpcds_workflow, MATERIALIZED_NODES};
use formatsel_core::formats::FormatName;
use formatsel_core::selector::{choose_for_workflow, rule_based_choice, DecisionPath, SelectorConfig};
use formatsel_core::validate::{self, size_suite, SuiteReport, ValidationConfig, ValidationReport};
use formatsel_core::workflow::{SelectionMode, SelectionOptions};

const SIZE_TOLERANCE_PCT: f64 = 5.0;
const SIZE_TIME_BUDGET: Duration = Duration::from_secs(60);
const PROJECTION_TOLERANCE_PCT: f64 = 5.0;
const SELECTION_TOLERANCE_PCT: f64 = 6.0;
const HIT_TOLERANCE: f64 = 0.01;
const ORDERING_MIN_CASES: usize = 200;
const ORDERING_MIN_AGREEMENT: f64 = 0.95;
const ORDERING_TIE_BAND: f64 = 0.03;
const SEED: u64 = 42;

const RULE_AVRO: [&str; 2] = ["N1", "N9"];
const COST_PARQUET: [&str; 2] = ["N5", "N6"];
const RULE_FAILURES: [&str; 5] = ["N2", "N3", "N4", "N7", "N8"];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn formatsel(args: &[&str]) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_formatsel"))
        .args(args)
        .env_remove("FORMATSEL_CONFIG")
        .output()
        .expect("binary runs");
    assert!(
        matches!(o.status.code(), Some(0 | 1)),
        "formatsel {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o.stdout
}

fn suite<'a>(r: &'a ValidationReport, name: &str) -> &'a SuiteReport {
    r.suite(name).unwrap_or_else(|| panic!("suite {name} missing"))
}

fn max_abs_error(s: &SuiteReport, filter: impl Fn(&str) -> bool) -> f64 {
    s.details
        .iter()
        .filter(|p| filter(&p.parameter))
        .filter_map(|p| p.error)
        .fold(0.0, |m, e| m.max(e.abs()))
}

fn expected_rule(node: &str) -> FormatName {
    if RULE_AVRO.contains(&node) {
        FormatName::Avro
    } else {
        FormatName::Parquet
    }
}

fn expected_cost(node: &str) -> FormatName {
    if COST_PARQUET.contains(&node) {
        FormatName::Parquet
    } else {
        FormatName::Avro
    }
}

fn size_accuracy(report: &ValidationReport) -> Verdict {
    let start = Instant::now();
    let timed = size_suite(&ValidationConfig {
        seed: SEED,
        quick: false,
    })
    .expect("size suite runs");
    let elapsed = start.elapsed();
    let s = suite(report, "size");
    let mut formats_ok = true;
    for f in FormatName::STANDARD {
        let label = format!("{f} ");
        formats_ok &= s.details.iter().any(|p| p.parameter.starts_with(&label));
    }
    let rows_ok = ["rows=1000 ", "rows=10000000 "]
        .iter()
        .all(|r| s.details.iter().any(|p| p.parameter.contains(r)));
    let worst = max_abs_error(s, |_| true);
    verdict(
        s.passed && worst <= SIZE_TOLERANCE_PCT && formats_ok && rows_ok && elapsed <= SIZE_TIME_BUDGET && timed == *s,
        format!(
            "{} points, max |error| {worst:.3}% <= {SIZE_TOLERANCE_PCT}%, {:.1} s <= {} s",
            s.points,
            elapsed.as_secs_f64(),
            SIZE_TIME_BUDGET.as_secs()
        ),
    )
}

fn projection_accuracy(report: &ValidationReport) -> Verdict {
    let s = suite(report, "projection");
    let parquet: Vec<_> = s.details.iter().filter(|p| p.parameter.starts_with("parquet")).collect();
    let widths_ok = (5..=25).all(|r| {
        parquet
            .iter()
            .any(|p| p.parameter == format!("parquet ref_cols={r}/25"))
    });
    let worst = max_abs_error(s, |p| p.starts_with("parquet"));
    let row_formats_exact = s
        .details
        .iter()
        .filter(|p| !p.parameter.starts_with("parquet"))
        .all(|p| p.passed && p.estimated.to_bits() == p.actual.to_bits());
    verdict(
        s.passed && widths_ok && worst <= PROJECTION_TOLERANCE_PCT && row_formats_exact,
        format!(
            "parquet max |error| {worst:.3}% <= {PROJECTION_TOLERANCE_PCT}% over ref_cols 5..25; seqfile/avro identical to scan: {row_formats_exact}"
        ),
    )
}

fn selection_accuracy(report: &ValidationReport) -> Verdict {
    let s = suite(report, "selection");
    let mut grid_ok = true;
    for sf in ["0.000001", "0.00001", "0.0001", "0.001", "0.01", "0.1", "0.19", "0.5"] {
        for order in ["sorted", "unsorted"] {
            let label = format!("parquet sf={sf} {order}");
            grid_ok &= s.details.iter().any(|p| p.parameter == label);
        }
    }
    let worst = max_abs_error(s, |p| p.starts_with("parquet"));
    let others_exact = s
        .details
        .iter()
        .filter(|p| !p.parameter.starts_with("parquet"))
        .all(|p| p.estimated.to_bits() == p.actual.to_bits());
    verdict(
        s.passed && grid_ok && worst <= SELECTION_TOLERANCE_PCT && others_exact,
        format!(
            "parquet max |error| {worst:.3}% <= {SELECTION_TOLERANCE_PCT}% over sf 1e-6..0.5 sorted and unsorted; other layouts identical to scan: {others_exact}"
        ),
    )
}

fn hit_probability(report: &ValidationReport) -> Verdict {
    let s = suite(report, "hit_probability");
    let grid_ok = ["1e-5", "0.001", "0.1", "0.19", "0.92"].iter().all(|sf| {
        let v: f64 = sf.parse().unwrap();
        s.details.iter().any(|p| p.parameter.starts_with(&format!("sf={v} ")))
    });
    let worst = max_abs_error(s, |_| true);
    verdict(
        s.passed && grid_ok && worst <= HIT_TOLERANCE && !report.quick,
        format!("max |analytic - monte carlo| {worst:.5} <= {HIT_TOLERANCE} over {} points, 1e5 trials", s.points),
    )
}

fn rule_decisions() -> Verdict {
    let wf = tpcds_workflow();
    let mut wrong = Vec::new();
    for node in MATERIALIZED_NODES {
        let ops = wf.outgoing_operations(node).expect("node exists");
        let got = rule_based_choice(&ops).expect("non-empty operations");
        if got != expected_rule(node) {
            wrong.push(format!("{node}={got}"));
        }
    }
    verdict(
        wrong.is_empty(),
        format!("avro for N1, N9 and parquet for N2..N8; mismatches: {wrong:?}"),
    )
}

fn cost_decisions() -> Verdict {
    let wf = tpcds_workflow();
    let catalog = tpcds_catalog();
    let config = SelectorConfig::default();
    let decisions = choose_for_workflow(&wf, Some(&catalog), SelectionOptions::new(SelectionMode::Both), &config)
        .expect("decisions");
    let chosen: BTreeMap<_, _> = decisions
        .iter()
        .map(|d| (d.node.as_str(), (d.choice.format, d.choice.decided_by)))
        .collect();
    let mut wrong = Vec::new();
    for node in MATERIALIZED_NODES {
        match chosen.get(node) {
            Some(&(f, DecisionPath::Cost)) if f == expected_cost(node) => {}
            other => wrong.push(format!("{node}={other:?}")),
        }
    }
    let flips: Vec<_> = MATERIALIZED_NODES
        .into_iter()
        .filter(|n| expected_rule(n) != expected_cost(n))
        .collect();
    let sweep = decision_sweep(&config).expect("sweep");
    let unstable = sweep.iter().filter(|o| o.chosen.as_str() != expected_cost(&o.node).as_str()).count();
    verdict(
        wrong.is_empty() && unstable == 0 && flips == RULE_FAILURES && sweep.len() == 216 * 9,
        format!(
            "avro for N1..N4, N7..N9 and parquet for N5, N6; {} sweep decisions, {unstable} deviate; rules fail at {flips:?}",
            sweep.len()
        ),
    )
}

fn ordering(report: &ValidationReport) -> Verdict {
    let s = suite(report, "ordering");
    let exact = suite(report, "ordering_exact");
    verdict(
        validate::ORDERING_TIE_BAND == ORDERING_TIE_BAND
            && s.passed
            && s.points >= ORDERING_MIN_CASES
            && s.metric >= ORDERING_MIN_AGREEMENT
            && exact.passed
            && exact.points >= ORDERING_MIN_CASES
            && exact.metric == 1.0,
        format!(
            "{} cases, agreement {:.3} >= {ORDERING_MIN_AGREEMENT} (strict {:.3}); p=1,R=1 agreement {:.3} (strict {:.3}); costs within {}% count as ties",
            s.points,
            s.metric,
            s.strict_agreement.unwrap_or(f64::NAN),
            exact.metric,
            exact.strict_agreement.unwrap_or(f64::NAN),
            ORDERING_TIE_BAND * 100.0
        ),
    )
}

fn crossover() -> Verdict {
    let r: CrossoverReport = serde_json::from_slice(&formatsel(&["crossover", "-o", "json"])).expect("crossover json");
    let x = r.unique_crossover();
    let first = r.points.first().expect("points");
    let last = r.points.last().expect("points");
    verdict(
        x.is_some_and(|x| x > 0.0 && x < 1.0)
            && first.hybrid_cost < first.horizontal_cost
            && last.horizontal_cost <= last.hybrid_cost,
        format!("crossovers {:?} for {} vs {}", r.crossovers, r.horizontal, r.hybrid),
    )
}

fn determinism(first: &[u8], second: &[u8]) -> Verdict {
    verdict(
        first == second && !first.is_empty(),
        format!("two full validate runs with seed {SEED}: {} and {} bytes, identical: {}", first.len(), second.len(), first == second),
    )
}

#[test]
fn acceptance() {
    let seed = SEED.to_string();
    let args = ["validate", "--seed", &seed, "-o", "json"];
    let first = formatsel(&args);
    let second = formatsel(&args);
    let report: ValidationReport = serde_json::from_slice(&first).expect("validation json");

    let results = [
        ("size estimation", size_accuracy(&report)),
        ("projection size", projection_accuracy(&report)),
        ("selection size", selection_accuracy(&report)),
        ("row-group hit probability", hit_probability(&report)),
        ("rule-based decisions", rule_decisions()),
        ("cost-based decisions", cost_decisions()),
        ("ordering preservation", ordering(&report)),
        ("crossover", crossover()),
    ];
    let mut failed = Vec::new();
    for (i, (name, v)) in results.iter().enumerate() {
        let n = i + 1;
        println!("criterion {n} {name}: {} ({})", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        if !v.passed {
            failed.push(n);
        }
    }
    println!("criterion 9 cluster speedups and wall-clock timings: N/A (not reproducible without the cluster; covered by criteria 6 and 7)");
    let d = determinism(&first, &second);
    println!("criterion 10 determinism: {} ({})", if d.passed { "PASS" } else { "FAIL" }, d.detail);
    if !d.passed {
        failed.push(10);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
