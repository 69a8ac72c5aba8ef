//! Run configuration: defaults, then a TOML or JSON document, then flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use formatsel_core::cost::{ProfileParams, SystemProfile};
use formatsel_core::formats::{
    AvroConstants, FormatDescriptor, FormatName, ParquetConstants, SeqFileConstants,
    VerticalConstants,
};
use formatsel_core::selector::{DecisionPolicy, SelectorConfig};
use formatsel_core::workflow::SelectionMode;

use crate::error::CliError;

/// Environment variable naming the default configuration document.
pub const CONFIG_ENV: &str = "FORMATSEL_CONFIG";

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(OutputFormat::Text),
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(CliError::input(format!("unknown output format `{other}`"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Text => "text",
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

/// Partial constant tables; missing keys keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormatOverrides {
    pub seqfile: Option<SeqFileConstants>,
    pub avro: Option<AvroConstants>,
    pub parquet: Option<ParquetConstants>,
    pub vertical: Option<VerticalConstants>,
}

/// The configuration document as written on disk.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub system: Option<ProfileParams>,
    pub formats: FormatOverrides,
    pub candidates: Option<Vec<String>>,
    pub mode: Option<String>,
    pub restore: Option<String>,
    pub amortization_reads: Option<f64>,
    pub count_store_consumers: Option<bool>,
    pub output: Option<String>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    /// `.json` files are read as JSON, everything else as TOML.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
        }
    }
}

/// Flag values that override the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub candidates: Option<Vec<String>>,
    pub mode: Option<String>,
    pub restore: Option<String>,
    pub amortization_reads: Option<f64>,
    pub count_store_consumers: bool,
    pub output: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub source: Option<PathBuf>,
    pub system: SystemProfile,
    pub formats: BTreeMap<FormatName, FormatDescriptor>,
    pub candidates: Vec<FormatName>,
    pub mode: DecisionPolicy,
    pub restore: SelectionMode,
    pub amortization_reads: f64,
    pub count_store_consumers: bool,
    pub output: OutputFormat,
    pub seed: u64,
}

impl RunConfig {
    /// Reads `path`, or the file named by [`CONFIG_ENV`] when `path` is
    /// `None`, and applies `flags` on top.
    pub fn resolve(path: Option<&Path>, flags: &Overrides) -> Result<Self, CliError> {
        let source = path
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        let file = match &source {
            Some(p) => {
                log::debug!("loading configuration from {}", p.display());
                ConfigFile::load(p)?
            }
            None => ConfigFile::default(),
        };
        Self::build(source, file, flags)
    }

    pub fn build(source: Option<PathBuf>, file: ConfigFile, flags: &Overrides) -> Result<Self, CliError> {
        let system = SystemProfile::new(file.system.unwrap_or_default())?;
        let mut formats: BTreeMap<FormatName, FormatDescriptor> = FormatName::ALL
            .iter()
            .map(|&n| (n, FormatDescriptor::default_for(n)))
            .collect();
        let o = &file.formats;
        let overridden = [
            o.seqfile.map(FormatDescriptor::SeqFile),
            o.avro.map(FormatDescriptor::Avro),
            o.parquet.map(FormatDescriptor::Parquet),
            o.vertical.map(FormatDescriptor::Vertical),
        ];
        for fd in overridden.into_iter().flatten() {
            fd.validate()?;
            formats.insert(fd.name(), fd);
        }
        let candidates = match flags.candidates.as_ref().or(file.candidates.as_ref()) {
            Some(list) => parse_candidates(list)?,
            None => FormatName::STANDARD.to_vec(),
        };
        let mode = match flags.mode.as_ref().or(file.mode.as_ref()) {
            Some(m) => m.parse()?,
            None => DecisionPolicy::Auto,
        };
        let restore = match flags.restore.as_ref().or(file.restore.as_ref()) {
            Some(m) => m.parse()?,
            None => SelectionMode::Both,
        };
        let output = match flags.output.as_ref().or(file.output.as_ref()) {
            Some(m) => m.parse()?,
            None => OutputFormat::Text,
        };
        let cfg = RunConfig {
            source,
            system,
            formats,
            candidates,
            mode,
            restore,
            amortization_reads: flags.amortization_reads.or(file.amortization_reads).unwrap_or(1.0),
            count_store_consumers: flags.count_store_consumers
                || file.count_store_consumers.unwrap_or(false),
            output,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        };
        cfg.selector_config().validate()?;
        Ok(cfg)
    }

    pub fn descriptor(&self, name: FormatName) -> FormatDescriptor {
        self.formats[&name]
    }

    pub fn descriptor_by_name(&self, name: &str) -> Result<FormatDescriptor, CliError> {
        Ok(self.descriptor(name.parse()?))
    }

    pub fn selector_config(&self) -> SelectorConfig {
        SelectorConfig {
            candidates: self.candidates.iter().map(|&n| self.descriptor(n)).collect(),
            system: self.system,
            amortization_reads: self.amortization_reads,
            policy: self.mode,
        }
    }
}

/// Parses a candidate list, accepting comma-separated entries and
/// dropping duplicates while keeping order.
pub fn parse_candidates(items: &[String]) -> Result<Vec<FormatName>, CliError> {
    let mut out = Vec::new();
    for item in items {
        for name in item.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let n: FormatName = name.parse()?;
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::input("candidate list is empty"));
    }
    Ok(out)
}
