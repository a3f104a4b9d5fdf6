use std::path::Path;

use kaya_lmdi::dataset::{renormalize_groups, Finding, Severity};
use kaya_lmdi::identity::ClosureReport;
use kaya_lmdi::lmdi::{chain_decompose_with, decompose_intervals, Interval};
use kaya_lmdi::mitigation::{
    aggregate_periods, apply_band, assess_series, compare_official, fit_year_trend, rescale, to_coal_equivalent,
    MitigationRecord, PeriodAggregate, SavingsComparison, ScaleSet, TrendFit,
};
use kaya_lmdi::units::Unit;
use kaya_lmdi::{
    builtin_residential_identity, check_closure, load_panel, validate_panel, EffectTable, Error, IdentitySpec,
    PanelDataset, PanelSchema, ValidationReport, Year,
};
use serde::Serialize;

use crate::config::{load_periods, load_targets, Format, IdentitySource, RunConfig};
use crate::error::{CliError, Exit, Result};
use crate::report::{fmt_num, OutputDir, Table};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const VALIDATION_FILE: &str = "validation.json";

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config: &'a RunConfig,
    panel: PanelSummary,
    identity: &'a IdentitySpec,
    closure: &'a ClosureReport,
    validation: &'a ValidationReport,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct PanelSummary {
    first_year: Year,
    last_year: Year,
    span: (Year, Year),
}

/// Loads and validates the panel. Input-level load errors become a failed
/// report; I/O errors propagate.
fn load_validated(cfg: &RunConfig) -> Result<(Option<PanelDataset>, ValidationReport)> {
    let schema = match &cfg.schema {
        Some(p) => PanelSchema::load(p)?,
        None => PanelSchema::default(),
    };
    let loaded = match load_panel(&cfg.input, &schema) {
        Ok(l) => l,
        Err(e) if e.kind() == kaya_lmdi::ErrorKind::Input => {
            let finding = Finding {
                severity: Severity::Error,
                year: None,
                symbol: None,
                message: e.to_string(),
            };
            return Ok((None, ValidationReport::from_findings(vec![finding])));
        }
        Err(e) => return Err(e.into()),
    };
    let panel = if cfg.renormalize {
        renormalize_groups(&loaded.panel)
    } else {
        loaded.panel
    };
    let report = ValidationReport::from_findings(loaded.findings).merged(validate_panel(&panel).findings);
    Ok((Some(panel), report))
}

fn summarize(report: &ValidationReport) -> String {
    let count = |s: Severity| report.findings.iter().filter(|f| f.severity == s).count();
    format!(
        "{} error(s), {} warning(s), {} info",
        count(Severity::Error),
        count(Severity::Warning),
        count(Severity::Info)
    )
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<Exit> {
    let (_, report) = load_validated(cfg)?;
    let mut out = OutputDir::create(&cfg.out)?;
    out.write_json(VALIDATION_FILE, &report)?;
    for f in report.findings.iter().filter(|f| f.severity == Severity::Error) {
        eprintln!("error: {}", describe(f));
    }
    if report.passed() {
        println!("validation passed: {}", summarize(&report));
        Ok(Exit::Ok)
    } else {
        eprintln!("validation failed: {}", summarize(&report));
        Ok(Exit::Input)
    }
}

fn describe(f: &Finding) -> String {
    match (f.year, &f.symbol) {
        (Some(y), Some(s)) => format!("{y} {s}: {}", f.message),
        (Some(y), None) => format!("{y}: {}", f.message),
        (None, Some(s)) => format!("{s}: {}", f.message),
        (None, None) => f.message.clone(),
    }
}

fn load_identity(cfg: &RunConfig) -> Result<IdentitySpec> {
    Ok(match &cfg.identity {
        IdentitySource::Builtin => builtin_residential_identity(),
        IdentitySource::File(p) => IdentitySpec::load(p)?,
    })
}

struct Decomposition {
    panel: PanelDataset,
    spec: IdentitySpec,
    report: ValidationReport,
    closure: ClosureReport,
    span: Interval,
    steps: Vec<EffectTable>,
    blocks: Vec<EffectTable>,
}

fn run_decomposition(cfg: &RunConfig) -> Result<Decomposition> {
    let (panel, report) = load_validated(cfg)?;
    let panel = match panel {
        Some(p) if report.passed() => p,
        _ => {
            OutputDir::create(&cfg.out)?.write_json(VALIDATION_FILE, &report)?;
            for f in report.findings.iter().filter(|f| f.severity == Severity::Error) {
                eprintln!("error: {}", describe(f));
            }
            return Err(CliError::Validation(
                report.findings.iter().filter(|f| f.severity == Severity::Error).count(),
            ));
        }
    };
    let spec = load_identity(cfg)?;
    let closure = check_closure(&spec, &panel, cfg.closure_tolerance)?;
    if !closure.passed() {
        let (year, residual) = closure.worst().expect("non-empty panel");
        return Err(Error::ClosureFailure {
            year,
            residual,
            tolerance: cfg.closure_tolerance,
        }
        .into());
    }
    let (t0, t1) = cfg.span.unwrap_or((panel.first_year(), panel.last_year()));
    let span = Interval::new(t0, t1)?;
    let options = cfg.lmdi_options();
    let steps = chain_decompose_with(&spec, &panel, span, &options, cfg.execution)?.steps;
    let blocks = cfg
        .blocks
        .iter()
        .map(|&(a, b)| Interval::new(a, b))
        .collect::<kaya_lmdi::Result<Vec<_>>>()?;
    let blocks = decompose_intervals(&spec, &panel, &blocks, &options, cfg.execution)?;
    Ok(Decomposition {
        panel,
        spec,
        report,
        closure,
        span,
        steps,
        blocks,
    })
}

/// `(column, factor index)` pairs for member marginals of grouped factors,
/// followed by per-member totals across all factors for each dimension.
fn effects_table(tables: &[EffectTable], spec: &IdentitySpec, prec: usize) -> Table {
    let target = &spec.target.name;
    let mut header = vec![
        "t0".to_string(),
        "t1".to_string(),
        format!("{target}_t0"),
        format!("{target}_t1"),
        format!("delta_{target}"),
    ];
    header.extend(spec.factor_names().map(str::to_string));
    header.push("effects_sum".into());
    let layout = tables.first().and_then(|t| t.sectors.clone());
    if let Some(layout) = &layout {
        for (f, factor) in spec.factors.iter().enumerate() {
            if let Some(dim) = factor.group {
                if let Some(d) = layout.dims.iter().position(|x| *x == dim) {
                    header.extend(
                        layout.members[d]
                            .iter()
                            .map(|m| format!("{}:{m}", spec.factors[f].name)),
                    );
                }
            }
        }
        for (d, dim) in layout.dims.iter().enumerate() {
            header.extend(layout.members[d].iter().map(|m| format!("{}:{m}", dim.name())));
        }
    }
    let mut table = Table::new(&header);
    for t in tables {
        let mut row = vec![
            t.interval.t0.to_string(),
            t.interval.t1.to_string(),
            fmt_num(t.target_t0, prec),
            fmt_num(t.target_t1, prec),
            fmt_num(t.delta_total, prec),
        ];
        row.extend(t.effects.iter().map(|e| fmt_num(*e, prec)));
        row.push(fmt_num(t.effects_sum(), prec));
        if let Some(layout) = &layout {
            for (f, factor) in spec.factors.iter().enumerate() {
                if let Some(dim) = factor.group {
                    if let Some(m) = t.member_marginals(f, dim) {
                        row.extend(m.iter().map(|(_, v)| fmt_num(*v, prec)));
                    }
                }
            }
            for (d, dim) in layout.dims.iter().enumerate() {
                let mut totals = vec![0.0; layout.members[d].len()];
                for f in 0..t.factors.len() {
                    for (k, (_, v)) in t.member_marginals(f, *dim).unwrap_or_default().iter().enumerate() {
                        totals[k] += v;
                    }
                }
                row.extend(totals.iter().map(|v| fmt_num(*v, prec)));
            }
        }
        table.push(row);
    }
    table
}

fn sector_table(tables: &[EffectTable], prec: usize) -> Option<Table> {
    let layout = tables.first()?.sectors.as_ref()?;
    let mut header = vec!["t0".to_string(), "t1".into(), "factor".into(), "sector".into()];
    header.extend(layout.dims.iter().map(|d| d.name().to_string()));
    header.push("effect".into());
    let mut table = Table::new(&header);
    for t in tables {
        let (layout, cells) = (t.sectors.as_ref()?, t.sector_effects.as_ref()?);
        for (f, name) in t.factors.iter().enumerate() {
            for (s, sector) in layout.sectors.iter().enumerate() {
                let mut row = vec![
                    t.interval.t0.to_string(),
                    t.interval.t1.to_string(),
                    name.clone(),
                    sector.label.clone(),
                ];
                row.extend(sector.members.iter().map(|(d, k)| {
                    let di = layout.dims.iter().position(|x| x == d).expect("layout dim");
                    layout.members[di][*k].clone()
                }));
                row.push(fmt_num(cells[f][s], prec));
                table.push(row);
            }
        }
    }
    Some(table)
}

/// Cumulative waterfall bars per interval: the start level, one bar per
/// factor in identity order, and the end level.
fn waterfall_table(tables: &[EffectTable], spec: &IdentitySpec, prec: usize) -> Table {
    let target = &spec.target.name;
    let mut table = Table::new(&["t0", "t1", "step", "label", "from", "to"]);
    for t in tables {
        let iv = [t.interval.t0.to_string(), t.interval.t1.to_string()];
        let mut push = |step: usize, label: String, from: f64, to: f64| {
            table.push(vec![
                iv[0].clone(),
                iv[1].clone(),
                step.to_string(),
                label,
                fmt_num(from, prec),
                fmt_num(to, prec),
            ]);
        };
        push(0, format!("{target}_t0"), 0.0, t.target_t0);
        let mut level = t.target_t0;
        for (k, (name, e)) in t.factors.iter().zip(&t.effects).enumerate() {
            push(k + 1, name.clone(), level, level + e);
            level += e;
        }
        push(t.factors.len() + 1, format!("{target}_t1"), 0.0, t.target_t1);
    }
    table
}

fn closure_table(report: &ClosureReport) -> Table {
    let mut table = Table::new(&["year", "relative_residual"]);
    for (y, r) in &report.residuals {
        table.push(vec![y.to_string(), format!("{r:.3e}")]);
    }
    table
}

fn write_decomposition(out: &mut OutputDir, d: &Decomposition, prec: usize) -> Result<()> {
    out.write_table("effects.csv", &effects_table(&d.steps, &d.spec, prec))?;
    if let Some(t) = sector_table(&d.steps, prec) {
        out.write_table("sector_effects.csv", &t)?;
    }
    out.write_table("waterfall.csv", &waterfall_table(&d.steps, &d.spec, prec))?;
    if !d.blocks.is_empty() {
        out.write_table("blocks.csv", &effects_table(&d.blocks, &d.spec, prec))?;
        if let Some(t) = sector_table(&d.blocks, prec) {
            out.write_table("block_sector_effects.csv", &t)?;
        }
        out.write_table("block_waterfall.csv", &waterfall_table(&d.blocks, &d.spec, prec))?;
    }
    out.write_table("closure.csv", &closure_table(&d.closure))?;
    Ok(())
}

fn write_manifest(out: &mut OutputDir, command: &str, cfg: &RunConfig, d: &Decomposition) -> Result<()> {
    let mut outputs = out.written();
    outputs.push("manifest.json".into());
    outputs.sort();
    let manifest = Manifest {
        tool: TOOL,
        version: VERSION,
        command,
        config: cfg,
        panel: PanelSummary {
            first_year: d.panel.first_year(),
            last_year: d.panel.last_year(),
            span: (d.span.t0, d.span.t1),
        },
        identity: &d.spec,
        closure: &d.closure,
        validation: &d.report,
        outputs,
    };
    out.write_json("manifest.json", &manifest)
}

#[derive(Serialize)]
struct DecomposeResults<'a> {
    steps: &'a [EffectTable],
    blocks: &'a [EffectTable],
}

pub fn cmd_decompose(cfg: &RunConfig) -> Result<Exit> {
    let d = run_decomposition(cfg)?;
    let mut out = OutputDir::create(&cfg.out)?;
    if cfg.wants(Format::Csv) {
        write_decomposition(&mut out, &d, cfg.precision)?;
    }
    if cfg.wants(Format::Json) {
        out.write_json(
            "results.json",
            &DecomposeResults {
                steps: &d.steps,
                blocks: &d.blocks,
            },
        )?;
    }
    write_manifest(&mut out, "decompose", cfg, &d)?;
    println!(
        "decomposed {} interval(s) over {}-{}",
        d.steps.len() + d.blocks.len(),
        d.span.t0,
        d.span.t1
    );
    Ok(Exit::Ok)
}

#[derive(Serialize)]
struct Trend {
    series: &'static str,
    unit: Unit,
    fit: TrendFit,
}

#[derive(Serialize)]
struct Assessment {
    records: Vec<MitigationRecord>,
    scales: Vec<ScaleSet>,
    /// `(year, tCO2 per tce, Mtce)`.
    savings: Vec<(Year, f64, f64)>,
    periods: Vec<PeriodAggregate>,
    period_savings: Vec<(String, f64)>,
    comparison: Vec<SavingsComparison>,
    trends: Vec<Trend>,
    bands: Vec<kaya_lmdi::mitigation::BandedRecord>,
}

fn assess(cfg: &RunConfig, d: &Decomposition) -> Result<Assessment> {
    let chained = kaya_lmdi::ChainedResult {
        span: d.span,
        steps: d.steps.clone(),
    };
    let records = assess_series(&chained, &d.panel, &cfg.assess_options())?;
    let scales = records
        .iter()
        .map(|r| rescale(r, &d.panel))
        .collect::<kaya_lmdi::Result<Vec<_>>>()?;
    let mtce = to_coal_equivalent(&records, &d.panel, cfg.coal_factor)?;
    let savings = records
        .iter()
        .zip(&mtce)
        .map(|(r, &(year, m))| {
            let factor = match cfg.coal_factor {
                Some(f) => f,
                None => d.panel.value_in("C", year, Unit::MtCo2)? / d.panel.value_in("E", year, Unit::Mtce)?,
            };
            debug_assert_eq!(year, r.year());
            Ok((year, factor, m))
        })
        .collect::<kaya_lmdi::Result<Vec<_>>>()?;

    let periods = match &cfg.periods {
        Some(p) => load_periods(p)?,
        None => Vec::new(),
    };
    let aggregates = if periods.is_empty() {
        Vec::new()
    } else {
        aggregate_periods(&records, &periods, cfg.period_mean)?
    };
    let period_savings: Vec<(String, f64)> = periods
        .iter()
        .map(|p| {
            let s = savings.iter().filter(|s| p.contains(s.0)).map(|s| s.2).sum();
            (p.label.clone(), s)
        })
        .collect();
    let comparison = match &cfg.targets {
        Some(path) => {
            let targets = load_targets(path)?;
            let official: Vec<(String, f64)> = targets.into_iter().map(|t| (t.label, t.mtce)).collect();
            compare_official(&period_savings, &official)?
        }
        None => Vec::new(),
    };

    let mut trends = Vec::new();
    if records.len() >= 2 {
        let series: [(&'static str, Unit, Vec<f64>); 5] = [
            ("total", Unit::MtCo2, records.iter().map(|r| r.total).collect()),
            (
                "intensity",
                Unit::KgCo2PerHousehold,
                records.iter().map(|r| r.intensity).collect(),
            ),
            (
                "per_capita",
                Unit::KgCo2PerPerson,
                scales.iter().map(|s| s.per_capita).collect(),
            ),
            (
                "per_floor",
                Unit::KgCo2PerSquareMetre,
                scales.iter().map(|s| s.per_floor).collect(),
            ),
            ("savings", Unit::Mtce, savings.iter().map(|s| s.2).collect()),
        ];
        for (name, unit, values) in series {
            let points: Vec<(Year, f64)> = records.iter().map(|r| r.year()).zip(values).collect();
            trends.push(Trend {
                series: name,
                unit,
                fit: fit_year_trend(&points)?,
            });
        }
    }
    let bands = match cfg.uncertainty_band()? {
        Some(b) => apply_band(&records, &b),
        None => Vec::new(),
    };
    Ok(Assessment {
        records,
        scales,
        savings,
        periods: aggregates,
        period_savings,
        comparison,
        trends,
        bands,
    })
}

fn write_assessment(out: &mut OutputDir, a: &Assessment, prec: usize) -> Result<()> {
    let f = |v: f64| fmt_num(v, prec);
    let mut header = vec![
        "year",
        "t0",
        "t1",
        "households_million",
        "intensity_kgco2_per_household",
        "total_mtco2",
        "per_capita_kgco2",
        "per_floor_kgco2_per_m2",
    ];
    if !a.bands.is_empty() {
        header.extend(["intensity_low", "intensity_high", "total_low", "total_high"]);
    }
    let mut table = Table::new(&header);
    for (k, (r, s)) in a.records.iter().zip(&a.scales).enumerate() {
        let mut row = vec![
            r.year().to_string(),
            r.interval.t0.to_string(),
            r.interval.t1.to_string(),
            f(r.households_used),
            f(r.intensity),
            f(r.total),
            f(s.per_capita),
            f(s.per_floor),
        ];
        if let Some(b) = a.bands.get(k) {
            row.extend([f(b.intensity.low), f(b.intensity.high), f(b.total.low), f(b.total.high)]);
        }
        table.push(row);
    }
    out.write_table("mitigation.csv", &table)?;

    let mut table = Table::new(&["year", "total_mtco2", "emission_factor_tco2_per_tce", "savings_mtce"]);
    for (r, (year, factor, m)) in a.records.iter().zip(&a.savings) {
        table.push(vec![year.to_string(), f(r.total), f(*factor), f(*m)]);
    }
    out.write_table("savings.csv", &table)?;

    if !a.periods.is_empty() {
        let mut table = Table::new(&[
            "label",
            "start",
            "end",
            "years",
            "total_mtco2",
            "mean_intensity_kgco2_per_household",
            "savings_mtce",
        ]);
        for (p, (_, s)) in a.periods.iter().zip(&a.period_savings) {
            table.push(vec![
                p.label.clone(),
                p.start.to_string(),
                p.end.to_string(),
                p.years.to_string(),
                f(p.total),
                f(p.mean_intensity),
                f(*s),
            ]);
        }
        out.write_table("periods.csv", &table)?;
    }
    if !a.comparison.is_empty() {
        let mut table = Table::new(&["label", "assessed_mtce", "expected_mtce", "coverage"]);
        for c in &a.comparison {
            table.push(vec![c.label.clone(), f(c.assessed), f(c.expected), f(c.coverage)]);
        }
        out.write_table("comparison.csv", &table)?;
    }
    let mut table = Table::new(&["series", "unit", "slope_per_year", "intercept", "r2", "n"]);
    for t in &a.trends {
        table.push(vec![
            t.series.to_string(),
            t.unit.to_string(),
            f(t.fit.slope),
            f(t.fit.intercept),
            f(t.fit.r2),
            t.fit.n.to_string(),
        ]);
    }
    out.write_table("trends.csv", &table)
}

#[derive(Serialize)]
struct AssessResults<'a> {
    steps: &'a [EffectTable],
    blocks: &'a [EffectTable],
    assessment: &'a Assessment,
}

pub fn cmd_assess(cfg: &RunConfig) -> Result<Exit> {
    let d = run_decomposition(cfg)?;
    let a = assess(cfg, &d)?;
    let mut out = OutputDir::create(&cfg.out)?;
    if cfg.wants(Format::Csv) {
        write_decomposition(&mut out, &d, cfg.precision)?;
        write_assessment(&mut out, &a, cfg.precision)?;
    }
    if cfg.wants(Format::Json) {
        out.write_json(
            "results.json",
            &AssessResults {
                steps: &d.steps,
                blocks: &d.blocks,
                assessment: &a,
            },
        )?;
    }
    write_manifest(&mut out, "assess", cfg, &d)?;
    let total: f64 = a.records.iter().map(|r| r.total).sum();
    println!(
        "assessed {} year(s) over {}-{}: total mitigation {} MtCO2",
        a.records.len(),
        d.span.t0,
        d.span.t1,
        fmt_num(total, 2)
    );
    Ok(Exit::Ok)
}

pub fn cmd_emit_identity(path: &Path) -> Result<Exit> {
    builtin_residential_identity().save(path)?;
    Ok(Exit::Ok)
}
