use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use formatsel_core::validate::{
    hit_probability_suite, ordering_suite, projection_suite, run_validation, selection_suite,
    size_suite, SuiteReport, ValidationConfig, ValidationReport,
};

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;
use crate::render::{self, opt6, sig6, Table};

pub const SUITES: [&str; 6] = [
    "size",
    "projection",
    "selection",
    "hit_probability",
    "ordering",
    "ordering_exact",
];

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Smaller sweeps and fewer trials.
    #[arg(long)]
    pub quick: bool,

    /// Run only these suites (comma-separated). All by default.
    #[arg(long, value_delimiter = ',')]
    pub suite: Option<Vec<String>>,

    /// Also write every (parameter, estimated, actual, error) point here.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

fn run_suite(name: &str, cfg: &ValidationConfig) -> Result<SuiteReport, CliError> {
    Ok(match name {
        "size" => size_suite(cfg)?,
        "projection" => projection_suite(cfg)?,
        "selection" => selection_suite(cfg)?,
        "hit_probability" => hit_probability_suite(cfg),
        "ordering" => ordering_suite(cfg, false)?,
        "ordering_exact" => ordering_suite(cfg, true)?,
        other => return Err(CliError::unknown(format!("unknown suite `{other}`"))),
    })
}

pub fn validation(args: &ValidateArgs, seed: u64) -> Result<ValidationReport, CliError> {
    let cfg = ValidationConfig {
        seed,
        quick: args.quick,
    };
    let Some(names) = &args.suite else {
        return Ok(run_validation(&cfg)?);
    };
    if let Some(bad) = names.iter().find(|n| !SUITES.contains(&n.as_str())) {
        return Err(CliError::unknown(format!(
            "unknown suite `{bad}` (known: {})",
            SUITES.join(", ")
        )));
    }
    let suites = SUITES
        .iter()
        .filter(|s| names.iter().any(|n| n == *s))
        .map(|s| run_suite(s, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ValidationReport {
        seed,
        quick: args.quick,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

pub fn run(args: &ValidateArgs, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let report = validation(args, cfg.seed)?;
    let points: Vec<_> = report.points().collect();
    if let Some(path) = &args.csv {
        render::csv_file(path, &points)?;
    }
    match cfg.output {
        OutputFormat::Json => render::json(out, &report)?,
        OutputFormat::Csv => render::csv_rows(out, &points)?,
        OutputFormat::Text => {
            writeln!(out, "seed {}  quick {}", report.seed, report.quick)?;
            let mut t = Table::new([
                "suite", "result", "tolerance", "points", "failures", "metric", "strict",
            ]);
            for s in &report.suites {
                t.row([
                    s.name.clone(),
                    verdict(s.passed).into(),
                    s.tolerance.clone(),
                    s.points.to_string(),
                    s.failures.to_string(),
                    sig6(s.metric),
                    opt6(s.strict_agreement),
                ]);
            }
            t.write(out, "")?;
            writeln!(out, "overall {}", verdict(report.passed))?;
        }
    }
    Ok(if report.passed {
        crate::exit::SUCCESS
    } else {
        crate::exit::VALIDATION_FAILED
    })
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}
