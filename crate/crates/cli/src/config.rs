//! Run configuration: an optional TOML file overridden field by field by
//! command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use kaya_lmdi::identity::DEFAULT_CLOSURE_TOLERANCE;
use kaya_lmdi::lmdi::{LmdiOptions, LogMeanVariant, Mode, ZeroPolicy};
use kaya_lmdi::mitigation::{
    AssessOptions, BandKind, HouseholdConvention, Period, PeriodMean, SignScope, UncertaintyBand,
};
use kaya_lmdi::{Execution, Year};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, Result};

pub const DEFAULT_PRECISION: usize = 6;
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdentitySource {
    Builtin,
    File(PathBuf),
}

impl Serialize for IdentitySource {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            IdentitySource::Builtin => s.serialize_str("builtin"),
            IdentitySource::File(p) => s.serialize_str(&p.to_string_lossy()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub intensity: f64,
    pub total: f64,
    #[serde(default)]
    pub kind: BandKind,
}

/// Contents of a `--config` file. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub identity: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub span: Option<[Year; 2]>,
    pub blocks: Option<Vec<[Year; 2]>>,
    pub scope: Option<SignScope>,
    pub households: Option<HouseholdConvention>,
    pub period_mean: Option<PeriodMean>,
    pub zero_policy: Option<ZeroPolicy>,
    pub log_mean: Option<LogMeanVariant>,
    pub closure_tolerance: Option<f64>,
    pub periods: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub coal_factor: Option<f64>,
    pub band: Option<BandConfig>,
    pub renormalize: Option<bool>,
    pub formats: Option<Vec<Format>>,
    pub precision: Option<usize>,
    pub execution: Option<Execution>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: ConfigFile = toml::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.input,
            &mut cfg.schema,
            &mut cfg.identity,
            &mut cfg.out,
            &mut cfg.periods,
            &mut cfg.targets,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

fn parse_span(s: &str) -> std::result::Result<(Year, Year), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:END, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<Year>().map_err(|e| format!("{x:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Aggregate,
    Sectoral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Factor,
    Sector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HouseholdsArg {
    End,
    Start,
    Logmean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PeriodMeanArg {
    Arithmetic,
    HouseholdWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZeroPolicyArg {
    DeltaSubstitute,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogMeanArg {
    AnalyticLimit,
    ZeroOnTie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandKindArg {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExecutionArg {
    Sequential,
    Parallel,
}

/// Flags shared by the panel-reading subcommands. Every flag overrides the
/// matching config-file field.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Panel CSV file.
    #[arg(long, short, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Column-mapping schema (TOML); defaults to the residential layout.
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
    /// Identity configuration (TOML); defaults to the builtin identity.
    #[arg(long, value_name = "FILE")]
    pub identity: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Year span as START:END (defaults to the whole panel).
    #[arg(long, value_parser = parse_span, value_name = "START:END")]
    pub span: Option<(Year, Year)>,
    /// Extra multi-year interval to decompose directly; repeatable.
    #[arg(long = "block", value_parser = parse_span, value_name = "START:END")]
    pub blocks: Vec<(Year, Year)>,
    /// Sign scope for mitigation intensity.
    #[arg(long, value_enum)]
    pub scope: Option<ScopeArg>,
    /// Household stock used to scale intensity to totals.
    #[arg(long, value_enum)]
    pub households: Option<HouseholdsArg>,
    #[arg(long, value_enum)]
    pub period_mean: Option<PeriodMeanArg>,
    #[arg(long, value_enum)]
    pub zero_policy: Option<ZeroPolicyArg>,
    #[arg(long, value_enum)]
    pub log_mean: Option<LogMeanArg>,
    /// Relative closure tolerance.
    #[arg(long, value_name = "TOL")]
    pub closure_tolerance: Option<f64>,
    /// Period definitions (TOML).
    #[arg(long, value_name = "FILE")]
    pub periods: Option<PathBuf>,
    /// Official savings targets (TOML), compared against period savings.
    #[arg(long, value_name = "FILE")]
    pub targets: Option<PathBuf>,
    /// Constant emission factor in tCO2/tce for coal-equivalent savings
    /// (defaults to each year's C/E).
    #[arg(long, value_name = "TCO2_PER_TCE")]
    pub coal_factor: Option<f64>,
    /// Band half-width for intensity.
    #[arg(long, value_name = "WIDTH", requires = "band_total")]
    pub band_intensity: Option<f64>,
    /// Band half-width for totals.
    #[arg(long, value_name = "WIDTH", requires = "band_intensity")]
    pub band_total: Option<f64>,
    #[arg(long, value_enum)]
    pub band_kind: Option<BandKindArg>,
    /// Rescale group members to match their aggregates before validating.
    #[arg(long)]
    pub renormalize: bool,
    /// Output formats; repeatable.
    #[arg(long = "format", value_enum, value_name = "FORMAT")]
    pub formats: Vec<Format>,
    /// Decimal places in CSV output.
    #[arg(long, value_name = "DIGITS")]
    pub report_precision: Option<usize>,
    #[arg(long, value_enum)]
    pub execution: Option<ExecutionArg>,
}

/// Fully resolved configuration, echoed into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub schema: Option<PathBuf>,
    pub identity: IdentitySource,
    pub out: PathBuf,
    pub mode: Mode,
    pub span: Option<(Year, Year)>,
    pub blocks: Vec<(Year, Year)>,
    pub scope: SignScope,
    pub households: HouseholdConvention,
    pub period_mean: PeriodMean,
    pub zero_policy: ZeroPolicy,
    pub log_mean: LogMeanVariant,
    pub closure_tolerance: f64,
    pub periods: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub coal_factor: Option<f64>,
    pub band: Option<BandConfig>,
    pub renormalize: bool,
    pub formats: Vec<Format>,
    pub precision: usize,
    pub execution: Execution,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let input = args
            .input
            .clone()
            .or(file.input)
            .ok_or_else(|| CliError::Usage("no input panel given (use --input or `input` in the config)".into()))?;
        let band = match (args.band_intensity, args.band_total) {
            (Some(intensity), Some(total)) => Some(BandConfig {
                intensity,
                total,
                kind: args
                    .band_kind
                    .map(band_kind)
                    .or(file.band.map(|b| b.kind))
                    .unwrap_or_default(),
            }),
            _ => file.band.map(|b| BandConfig {
                kind: args.band_kind.map(band_kind).unwrap_or(b.kind),
                ..b
            }),
        };
        let mut formats = if args.formats.is_empty() {
            file.formats.unwrap_or_else(|| vec![Format::Csv])
        } else {
            args.formats.clone()
        };
        formats.sort();
        formats.dedup();
        let cfg = RunConfig {
            input,
            schema: args.schema.clone().or(file.schema),
            identity: args
                .identity
                .clone()
                .or(file.identity)
                .map_or(IdentitySource::Builtin, IdentitySource::File),
            out: args
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            mode: args
                .mode
                .map(|m| match m {
                    ModeArg::Aggregate => Mode::Aggregate,
                    ModeArg::Sectoral => Mode::Sectoral,
                })
                .or(file.mode)
                .unwrap_or_default(),
            span: args.span.or(file.span.map(|[a, b]| (a, b))),
            blocks: if args.blocks.is_empty() {
                file.blocks
                    .unwrap_or_default()
                    .into_iter()
                    .map(|[a, b]| (a, b))
                    .collect()
            } else {
                args.blocks.clone()
            },
            scope: args
                .scope
                .map(|s| match s {
                    ScopeArg::Factor => SignScope::Factor,
                    ScopeArg::Sector => SignScope::Sector,
                })
                .or(file.scope)
                .unwrap_or_default(),
            households: args
                .households
                .map(|h| match h {
                    HouseholdsArg::End => HouseholdConvention::End,
                    HouseholdsArg::Start => HouseholdConvention::Start,
                    HouseholdsArg::Logmean => HouseholdConvention::Logmean,
                })
                .or(file.households)
                .unwrap_or_default(),
            period_mean: args
                .period_mean
                .map(|m| match m {
                    PeriodMeanArg::Arithmetic => PeriodMean::Arithmetic,
                    PeriodMeanArg::HouseholdWeighted => PeriodMean::HouseholdWeighted,
                })
                .or(file.period_mean)
                .unwrap_or_default(),
            zero_policy: args
                .zero_policy
                .map(|z| match z {
                    ZeroPolicyArg::DeltaSubstitute => ZeroPolicy::DeltaSubstitute,
                    ZeroPolicyArg::Reject => ZeroPolicy::Reject,
                })
                .or(file.zero_policy)
                .unwrap_or_default(),
            log_mean: args
                .log_mean
                .map(|l| match l {
                    LogMeanArg::AnalyticLimit => LogMeanVariant::AnalyticLimit,
                    LogMeanArg::ZeroOnTie => LogMeanVariant::ZeroOnTie,
                })
                .or(file.log_mean)
                .unwrap_or_default(),
            closure_tolerance: args
                .closure_tolerance
                .or(file.closure_tolerance)
                .unwrap_or(DEFAULT_CLOSURE_TOLERANCE),
            periods: args.periods.clone().or(file.periods),
            targets: args.targets.clone().or(file.targets),
            coal_factor: args.coal_factor.or(file.coal_factor),
            band,
            renormalize: args.renormalize || file.renormalize.unwrap_or(false),
            formats,
            precision: args.report_precision.or(file.precision).unwrap_or(DEFAULT_PRECISION),
            execution: args
                .execution
                .map(|e| match e {
                    ExecutionArg::Sequential => Execution::Sequential,
                    ExecutionArg::Parallel => Execution::Parallel,
                })
                .or(file.execution)
                .unwrap_or_default(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if !(self.closure_tolerance >= 0.0 && self.closure_tolerance.is_finite()) {
            return Err(CliError::Usage(format!(
                "closure tolerance must be a non-negative number, got {}",
                self.closure_tolerance
            )));
        }
        if self.precision > 17 {
            return Err(CliError::Usage(format!(
                "report precision must be at most 17, got {}",
                self.precision
            )));
        }
        if self.formats.is_empty() {
            return Err(CliError::Usage("at least one output format is required".into()));
        }
        self.uncertainty_band()?;
        Ok(())
    }

    pub fn lmdi_options(&self) -> LmdiOptions {
        LmdiOptions {
            mode: self.mode,
            zero_policy: self.zero_policy,
            log_mean: self.log_mean,
            closure_tolerance: self.closure_tolerance,
        }
    }

    pub fn assess_options(&self) -> AssessOptions {
        AssessOptions {
            scope: self.scope,
            convention: self.households,
        }
    }

    pub fn uncertainty_band(&self) -> Result<Option<UncertaintyBand>> {
        self.band
            .map(|b| UncertaintyBand::new(b.intensity, b.total, b.kind).map_err(CliError::from))
            .transpose()
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

fn band_kind(k: BandKindArg) -> BandKind {
    match k {
        BandKindArg::Absolute => BandKind::Absolute,
        BandKindArg::Relative => BandKind::Relative,
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PeriodsFile {
    #[serde(rename = "period")]
    periods: Vec<Period>,
}

/// Official savings expectation in Mtce for a period label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub label: String,
    pub mtce: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetsFile {
    #[serde(rename = "target")]
    targets: Vec<Target>,
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })
}

/// Reads `[[period]]` tables with `label`, `start` and `end` (inclusive).
pub fn load_periods(path: &Path) -> Result<Vec<Period>> {
    Ok(load_toml::<PeriodsFile>(path)?.periods)
}

/// Reads `[[target]]` tables with `label` and `mtce`.
pub fn load_targets(path: &Path) -> Result<Vec<Target>> {
    Ok(load_toml::<TargetsFile>(path)?.targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "input = \"panel.csv\"\nmode = \"aggregate\"\nspan = [2001, 2004]\nhouseholds = \"start\"\nprecision = 2\n\
             [band]\nintensity = 1.0\ntotal = 2.0\n",
        )
        .unwrap();
        let args = RunArgs {
            config: Some(path),
            mode: Some(ModeArg::Sectoral),
            report_precision: Some(3),
            ..RunArgs::default()
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.input, dir.path().join("panel.csv"));
        assert_eq!(cfg.mode, Mode::Sectoral);
        assert_eq!(cfg.span, Some((2001, 2004)));
        assert_eq!(cfg.households, HouseholdConvention::Start);
        assert_eq!(cfg.precision, 3);
        assert_eq!(cfg.band.unwrap().kind, BandKind::Absolute);
        assert_eq!(cfg.formats, vec![Format::Csv]);
    }

    #[test]
    fn missing_input_is_usage_error() {
        let err = RunConfig::resolve(&RunArgs::default()).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "input = \"x.csv\"\nmodee = \"aggregate\"\n").unwrap();
        let args = RunArgs {
            config: Some(path),
            ..RunArgs::default()
        };
        assert!(matches!(RunConfig::resolve(&args), Err(CliError::Parse { .. })));
    }

    #[test]
    fn span_parser() {
        assert_eq!(parse_span("2000:2016"), Ok((2000, 2016)));
        assert!(parse_span("2000-2016").is_err());
    }
}
