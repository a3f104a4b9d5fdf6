//! Mitigation accounting on top of decomposition effects.
//!
//! Mitigation intensity is the summed magnitude of the negative
//! (intensity-reducing) contributions of an interval; the mitigation total
//! scales it by the household stock. On top of the annual records this module
//! provides period aggregates, per-capita and per-floor-space rescaling,
//! coal-equivalent savings, comparison against official targets, least-squares
//! trends and uncertainty bands.

use serde::{Deserialize, Serialize};

use crate::dataset::{PanelDataset, Year};
use crate::error::{Error, Result};
use crate::lmdi::{log_mean, ChainedResult, EffectTable, Interval};
use crate::units::{convert_value, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignScope {
    /// Negativity judged on each factor's total effect.
    #[default]
    Factor,
    /// Negativity judged on each (factor, sector) cell.
    Sector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HouseholdConvention {
    /// Households at the interval's end year.
    #[default]
    End,
    Start,
    /// Logarithmic mean of start and end households.
    Logmean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodMean {
    #[default]
    Arithmetic,
    HouseholdWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AssessOptions {
    pub scope: SignScope,
    pub convention: HouseholdConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationRecord {
    pub interval: Interval,
    /// kgCO2 per household.
    pub intensity: f64,
    /// MtCO2.
    pub total: f64,
    /// Million households.
    pub households_used: f64,
    pub convention: HouseholdConvention,
}

impl MitigationRecord {
    /// Year the record is reported under (the interval's end).
    pub fn year(&self) -> Year {
        self.interval.t1
    }
}

/// Summed magnitude of the negative contributions in `effects`.
///
/// With [`SignScope::Sector`] on a table without sector cells the factor
/// effects are used.
pub fn cmrbs_intensity(effects: &EffectTable, scope: SignScope) -> f64 {
    let negatives = |values: &mut dyn Iterator<Item = f64>| -> f64 { values.filter(|v| *v < 0.0).map(|v| -v).sum() };
    match (scope, &effects.sector_effects) {
        (SignScope::Sector, Some(cells)) => negatives(&mut cells.iter().flatten().copied()),
        _ => negatives(&mut effects.effects.iter().copied()),
    }
}

/// Household stock (million households) used to scale an interval's
/// mitigation intensity.
pub fn households_for(panel: &PanelDataset, interval: Interval, convention: HouseholdConvention) -> Result<f64> {
    let h = |y| panel.value_in("H", y, Unit::MillionHouseholds);
    match convention {
        HouseholdConvention::End => h(interval.t1),
        HouseholdConvention::Start => h(interval.t0),
        HouseholdConvention::Logmean => log_mean(h(interval.t1)?, h(interval.t0)?),
    }
}

/// Mitigation total in MtCO2 for an intensity in kgCO2 per household.
pub fn total_from_intensity(intensity: f64, households: f64) -> f64 {
    let per_million =
        convert_value(intensity, Unit::KgCo2PerHousehold, Unit::MtCo2PerMillionHouseholds).expect("same dimension");
    households * per_million
}

pub fn cmrbs_total(
    intensity: f64,
    panel: &PanelDataset,
    interval: Interval,
    convention: HouseholdConvention,
) -> Result<f64> {
    Ok(total_from_intensity(
        intensity,
        households_for(panel, interval, convention)?,
    ))
}

pub fn assess_interval(
    effects: &EffectTable,
    panel: &PanelDataset,
    options: &AssessOptions,
) -> Result<MitigationRecord> {
    let intensity = cmrbs_intensity(effects, options.scope);
    let households_used = households_for(panel, effects.interval, options.convention)?;
    Ok(MitigationRecord {
        interval: effects.interval,
        intensity,
        total: total_from_intensity(intensity, households_used),
        households_used,
        convention: options.convention,
    })
}

/// One record per annual step of a chained decomposition.
pub fn assess_series(
    chained: &ChainedResult,
    panel: &PanelDataset,
    options: &AssessOptions,
) -> Result<Vec<MitigationRecord>> {
    chained
        .steps
        .iter()
        .map(|step| assess_interval(step, panel, options))
        .collect()
}

// ---------------------------------------------------------------------------
// Periods

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub label: String,
    /// First year (inclusive).
    pub start: Year,
    /// Last year (inclusive).
    pub end: Year,
}

impl Period {
    pub fn new(label: &str, start: Year, end: Year) -> Self {
        Self {
            label: label.to_string(),
            start,
            end,
        }
    }

    pub fn contains(&self, year: Year) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodAggregate {
    pub label: String,
    pub start: Year,
    pub end: Year,
    /// MtCO2, summed over member years.
    pub total: f64,
    /// kgCO2 per household and year.
    pub mean_intensity: f64,
    pub years: usize,
}

pub fn aggregate_periods(
    records: &[MitigationRecord],
    periods: &[Period],
    mean: PeriodMean,
) -> Result<Vec<PeriodAggregate>> {
    let span_start = records
        .iter()
        .map(|r| r.year())
        .min()
        .ok_or(Error::InvalidArgument("no mitigation records to aggregate".into()))?;
    let span_end = records.iter().map(|r| r.year()).max().expect("non-empty");
    for p in periods {
        if p.start > p.end || p.start < span_start || p.end > span_end {
            return Err(Error::PeriodOutOfSpan {
                label: p.label.clone(),
                start: p.start,
                end: p.end,
                span_start,
                span_end,
            });
        }
    }
    let mut ordered: Vec<&Period> = periods.iter().collect();
    ordered.sort_by_key(|p| (p.start, p.end));
    for w in ordered.windows(2) {
        if w[1].start <= w[0].end {
            return Err(Error::OverlappingPeriods(w[0].label.clone(), w[1].label.clone()));
        }
    }

    periods
        .iter()
        .map(|p| {
            let members: Vec<&MitigationRecord> = records.iter().filter(|r| p.contains(r.year())).collect();
            if members.is_empty() {
                return Err(Error::InvalidArgument(format!("period {:?} has no records", p.label)));
            }
            let total = members.iter().map(|r| r.total).sum();
            let mean_intensity = match mean {
                PeriodMean::Arithmetic => members.iter().map(|r| r.intensity).sum::<f64>() / members.len() as f64,
                PeriodMean::HouseholdWeighted => {
                    let w: f64 = members.iter().map(|r| r.households_used).sum();
                    members.iter().map(|r| r.intensity * r.households_used).sum::<f64>() / w
                }
            };
            Ok(PeriodAggregate {
                label: p.label.clone(),
                start: p.start,
                end: p.end,
                total,
                mean_intensity,
                years: members.len(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scales and savings

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSet {
    pub year: Year,
    /// kgCO2 per household.
    pub per_household: f64,
    /// kgCO2 per person.
    pub per_capita: f64,
    /// kgCO2 per square metre of floor space.
    pub per_floor: f64,
}

/// Per-capita and per-floor-space mitigation using the record's end-year
/// population and floor space.
pub fn rescale(record: &MitigationRecord, panel: &PanelDataset) -> Result<ScaleSet> {
    let year = record.year();
    let p = panel.value_in("P", year, Unit::MillionPersons)?;
    let f = panel.value_in("F", year, Unit::MillionSquareMetres)?;
    Ok(ScaleSet {
        year,
        per_household: record.intensity,
        per_capita: convert_value(record.total / p, Unit::MtCo2PerMillionPersons, Unit::KgCo2PerPerson)?,
        per_floor: convert_value(
            record.total / f,
            Unit::MtCo2PerMillionSquareMetres,
            Unit::KgCo2PerSquareMetre,
        )?,
    })
}

/// Converts mitigation totals to Mtce. Without an explicit factor (tCO2 per
/// tce) each year's aggregate emission factor `C/E` is used.
pub fn to_coal_equivalent(
    records: &[MitigationRecord],
    panel: &PanelDataset,
    factor: Option<f64>,
) -> Result<Vec<(Year, f64)>> {
    if let Some(f) = factor {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "emission factor must be positive, got {f}"
            )));
        }
    }
    records
        .iter()
        .map(|r| {
            let year = r.year();
            let f = match factor {
                Some(f) => f,
                None => panel.value_in("C", year, Unit::MtCo2)? / panel.value_in("E", year, Unit::Mtce)?,
            };
            Ok((year, r.total / f))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsComparison {
    pub label: String,
    pub assessed: f64,
    pub expected: f64,
    pub coverage: f64,
}

/// Coverage of each official expectation by the assessed savings. Every
/// official label needs an assessed value; assessed labels without an
/// official counterpart are skipped.
pub fn compare_official(assessed: &[(String, f64)], official: &[(String, f64)]) -> Result<Vec<SavingsComparison>> {
    official
        .iter()
        .map(|(label, expected)| {
            if expected.is_nan() || *expected <= 0.0 {
                return Err(Error::NonPositiveExpected {
                    label: label.clone(),
                    value: *expected,
                });
            }
            let assessed = assessed
                .iter()
                .find(|(l, _)| l == label)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::LabelMismatch(label.clone()))?;
            Ok(SavingsComparison {
                label: label.clone(),
                assessed,
                expected: *expected,
                coverage: assessed / expected,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Trends

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    /// Change per year.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

impl TrendFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least-squares line through `(x, y)` points. `r2` is `1` for a
/// constant series.
pub fn fit_trend(points: &[(f64, f64)]) -> Result<TrendFit> {
    let n = points.len();
    let distinct = points.iter().any(|p| p.0 != points[0].0);
    if n < 2 || !distinct {
        return Err(Error::TooFewPoints(n));
    }
    let nf = n as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x - x_mean;
        sxx += dx * dx;
        sxy += dx * (y - y_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let constant = points.iter().all(|p| p.1 == points[0].1);
    let r2 = if constant {
        1.0
    } else {
        let (mut ssr, mut sst) = (0.0, 0.0);
        for &(x, y) in points {
            let fitted = y_mean + slope * (x - x_mean);
            ssr += (y - fitted).powi(2);
            sst += (y - y_mean).powi(2);
        }
        1.0 - ssr / sst
    };
    Ok(TrendFit {
        slope,
        intercept,
        r2,
        n,
    })
}

pub fn fit_year_trend(series: &[(Year, f64)]) -> Result<TrendFit> {
    let points: Vec<(f64, f64)> = series.iter().map(|&(y, v)| (y as f64, v)).collect();
    fit_trend(&points)
}

// ---------------------------------------------------------------------------
// Bands

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandKind {
    #[default]
    Absolute,
    /// Half-widths are fractions of the value.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBand {
    /// kgCO2 per household (absolute) or fraction (relative).
    pub intensity: f64,
    /// MtCO2 (absolute) or fraction (relative).
    pub total: f64,
    pub kind: BandKind,
}

impl UncertaintyBand {
    pub fn new(intensity: f64, total: f64, kind: BandKind) -> Result<Self> {
        if !(intensity >= 0.0 && total >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "band half-widths must be non-negative, got {intensity} and {total}"
            )));
        }
        Ok(Self { intensity, total, kind })
    }

    fn bounds(&self, value: f64, half_width: f64) -> Bounds {
        let hw = match self.kind {
            BandKind::Absolute => half_width,
            BandKind::Relative => half_width * value.abs(),
        };
        Bounds {
            value,
            low: (value - hw).max(0.0),
            high: value + hw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandedRecord {
    pub year: Year,
    pub intensity: Bounds,
    pub total: Bounds,
}

pub fn apply_band(records: &[MitigationRecord], band: &UncertaintyBand) -> Vec<BandedRecord> {
    records
        .iter()
        .map(|r| BandedRecord {
            year: r.year(),
            intensity: band.bounds(r.intensity, band.intensity),
            total: band.bounds(r.total, band.total),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmdi::Mode;
    use approx::assert_relative_eq;

    fn table(effects: Vec<f64>, cells: Option<Vec<Vec<f64>>>) -> EffectTable {
        EffectTable {
            interval: Interval { t0: 2000, t1: 2001 },
            mode: if cells.is_some() {
                Mode::Sectoral
            } else {
                Mode::Aggregate
            },
            target_t0: 1.0,
            target_t1: 1.0,
            delta_total: effects.iter().sum(),
            factors: (0..effects.len()).map(|i| format!("f{i}")).collect(),
            effects,
            sectors: None,
            sector_effects: cells,
        }
    }

    fn record(year: Year, intensity: f64, total: f64, households: f64) -> MitigationRecord {
        MitigationRecord {
            interval: Interval { t0: year - 1, t1: year },
            intensity,
            total,
            households_used: households,
            convention: HouseholdConvention::End,
        }
    }

    #[test]
    fn intensity_sums_negative_magnitudes() {
        let t = table(vec![4.44778, -2.44778], None);
        assert_relative_eq!(cmrbs_intensity(&t, SignScope::Factor), 2.44778);
        assert_eq!(cmrbs_intensity(&table(vec![1.0, 2.0], None), SignScope::Factor), 0.0);
        let t = table(vec![0.0, 0.0], Some(vec![vec![0.0, 0.0], vec![2.0, -2.0]]));
        assert_eq!(cmrbs_intensity(&t, SignScope::Factor), 0.0);
        assert_eq!(cmrbs_intensity(&t, SignScope::Sector), 2.0);
    }

    #[test]
    fn total_scales_by_households() {
        assert_relative_eq!(total_from_intensity(2.44778, 100.0), 0.244778, max_relative = 1e-12);
        assert_eq!(total_from_intensity(0.0, 123.0), 0.0);
    }

    #[test]
    fn periods() {
        let records = vec![record(2001, 10.0, 100.0, 10.0), record(2002, 30.0, 200.0, 30.0)];
        let agg = aggregate_periods(&records, &[Period::new("x", 2001, 2002)], PeriodMean::Arithmetic).unwrap();
        assert_eq!(agg[0].total, 300.0);
        assert_eq!(agg[0].mean_intensity, 20.0);
        let w = aggregate_periods(&records, &[Period::new("x", 2001, 2002)], PeriodMean::HouseholdWeighted).unwrap();
        assert_eq!(w[0].mean_intensity, 25.0);
        let single = aggregate_periods(&records, &[Period::new("y", 2002, 2002)], PeriodMean::Arithmetic).unwrap();
        assert_eq!((single[0].total, single[0].mean_intensity), (200.0, 30.0));

        let outside = aggregate_periods(&records, &[Period::new("z", 2001, 2003)], PeriodMean::Arithmetic);
        assert!(matches!(outside, Err(Error::PeriodOutOfSpan { .. })));
        let overlap = [Period::new("a", 2001, 2002), Period::new("b", 2002, 2002)];
        assert!(matches!(
            aggregate_periods(&records, &overlap, PeriodMean::Arithmetic),
            Err(Error::OverlappingPeriods(..))
        ));
    }

    #[test]
    fn comparisons() {
        let a = vec![("13th".to_string(), 60.80)];
        let c = compare_official(&a, &[("13th".to_string(), 100.0)]).unwrap();
        assert_relative_eq!(c[0].coverage, 0.608, max_relative = 1e-15);
        let c = compare_official(&[("x".into(), 0.0)], &[("x".into(), 5.0)]).unwrap();
        assert_eq!(c[0].coverage, 0.0);
        let c = compare_official(&[("x".into(), 5.0)], &[("x".into(), 5.0)]).unwrap();
        assert_eq!(c[0].coverage, 1.0);
        assert!(matches!(
            compare_official(&a, &[("12th".to_string(), 1.0)]),
            Err(Error::LabelMismatch(_))
        ));
        assert!(matches!(
            compare_official(&a, &[("13th".to_string(), 0.0)]),
            Err(Error::NonPositiveExpected { .. })
        ));
    }

    #[test]
    fn trend_cases() {
        let t = fit_trend(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!((t.slope, t.intercept, t.r2), (1.0, 0.0, 1.0));
        let t = fit_trend(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert_eq!((t.slope, t.intercept, t.r2), (0.0, 1.0, 1.0));
        // Normal equations by hand: slope 3/2, intercept 5/6, R^2 = 1 - (1/6)/(14/3) = 27/28.
        let t = fit_trend(&[(0.0, 1.0), (1.0, 2.0), (2.0, 4.0)]).unwrap();
        assert_relative_eq!(t.slope, 1.5, max_relative = 1e-14);
        assert_relative_eq!(t.intercept, 5.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(t.r2, 27.0 / 28.0, max_relative = 1e-14);
        assert!(matches!(fit_trend(&[(1.0, 1.0)]), Err(Error::TooFewPoints(1))));
        assert!(fit_trend(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn bands() {
        let r = [record(2016, 266.12, 10.0, 1.0)];
        let zero = apply_band(&r, &UncertaintyBand::new(0.0, 0.0, BandKind::Absolute).unwrap());
        assert_eq!((zero[0].intensity.low, zero[0].intensity.high), (266.12, 266.12));
        let abs = apply_band(&r, &UncertaintyBand::new(89.45, 40.19, BandKind::Absolute).unwrap());
        assert_relative_eq!(abs[0].intensity.low, 176.67, max_relative = 1e-12);
        assert_relative_eq!(abs[0].intensity.high, 355.57, max_relative = 1e-12);
        assert_eq!(abs[0].total.low, 0.0);
        let rel = apply_band(&r, &UncertaintyBand::new(0.0, 0.1, BandKind::Relative).unwrap());
        assert_relative_eq!(rel[0].total.low, 9.0, max_relative = 1e-15);
        assert_relative_eq!(rel[0].total.high, 11.0, max_relative = 1e-15);
        assert!(UncertaintyBand::new(-1.0, 0.0, BandKind::Absolute).is_err());
    }
}
