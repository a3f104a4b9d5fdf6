//! Additive LMDI-I decomposition.
//!
//! For an identity `c = scale * x_1 * ... * x_n` the change over an interval
//! splits exactly into per-factor effects
//! `effect(x) = L(c(t1), c(t0)) * ln(x(t1) / x(t0))`, where `L` is the
//! logarithmic mean. In sectoral mode the target is treated as a sum over
//! sectors (the cross product of the identity's group dimensions) and each
//! factor's effect is the sum of its per-sector terms.

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupDim, PanelDataset, Year};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::identity::{
    closure_residual, evaluate_factors, group_members, FactorValues, IdentitySpec, DEFAULT_CLOSURE_TOLERANCE,
};

/// Multiplier applied to a member's series maximum when substituting zeros.
pub const ZERO_SUBSTITUTE_FRACTION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogMeanVariant {
    /// `L(a, a) = a`, the continuous extension.
    #[default]
    AnalyticLimit,
    /// `L(a, a) = 0`.
    ZeroOnTie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroPolicy {
    /// Replace a zero member value by `1e-10` times that member's maximum
    /// over the panel.
    #[default]
    DeltaSubstitute,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Aggregate,
    #[default]
    Sectoral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmdiOptions {
    pub mode: Mode,
    pub zero_policy: ZeroPolicy,
    pub log_mean: LogMeanVariant,
    pub closure_tolerance: f64,
}

impl Default for LmdiOptions {
    fn default() -> Self {
        Self {
            mode: Mode::default(),
            zero_policy: ZeroPolicy::default(),
            log_mean: LogMeanVariant::default(),
            closure_tolerance: DEFAULT_CLOSURE_TOLERANCE,
        }
    }
}

impl LmdiOptions {
    pub fn with_mode(self, mode: Mode) -> Self {
        Self { mode, ..self }
    }
}

/// Logarithmic mean `(a - b) / (ln a - ln b)`, with `L(a, a) = a`.
///
/// Evaluated as `(hi - lo) / ln_1p((hi - lo) / lo)` on the ordered pair, which
/// is symmetric bit-for-bit and stays accurate when `a` and `b` are close.
pub fn log_mean(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::NonPositiveLogMean(a, b));
    }
    if a == b {
        return Ok(a);
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    let diff = hi - lo;
    let l = diff / (diff / lo).ln_1p();
    Ok(l.clamp(lo, hi))
}

pub fn log_mean_with(a: f64, b: f64, variant: LogMeanVariant) -> Result<f64> {
    match variant {
        LogMeanVariant::ZeroOnTie if a == b && a > 0.0 => Ok(0.0),
        _ => log_mean(a, b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub t0: Year,
    pub t1: Year,
}

impl Interval {
    pub fn new(t0: Year, t1: Year) -> Result<Self> {
        if t1 <= t0 {
            return Err(Error::InvalidInterval { t0, t1 });
        }
        Ok(Self { t0, t1 })
    }

    fn check_within(&self, panel: &PanelDataset) -> Result<()> {
        for y in [self.t0, self.t1] {
            if !panel.contains_year(y) {
                return Err(Error::YearOutOfRange(y));
            }
        }
        Ok(())
    }
}

/// One cell of the cross product of group dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub label: String,
    /// `(dimension, member index)` for each grouped dimension.
    pub members: Vec<(GroupDim, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorLayout {
    pub dims: Vec<GroupDim>,
    /// Member labels per entry of `dims`.
    pub members: Vec<Vec<String>>,
    pub sectors: Vec<Sector>,
}

impl SectorLayout {
    pub fn for_identity(spec: &IdentitySpec, panel: &PanelDataset) -> Self {
        let dims = spec.group_dims();
        let members: Vec<Vec<String>> = dims.iter().map(|d| group_members(panel, *d)).collect();
        let mut sectors = vec![Sector {
            label: String::new(),
            members: Vec::new(),
        }];
        for (dim, labels) in dims.iter().zip(&members) {
            sectors = sectors
                .into_iter()
                .flat_map(|s| {
                    labels.iter().enumerate().map(move |(k, label)| {
                        let mut members = s.members.clone();
                        members.push((*dim, k));
                        let label = if s.label.is_empty() {
                            label.clone()
                        } else {
                            format!("{}/{}", s.label, label)
                        };
                        Sector { label, members }
                    })
                })
                .collect();
        }
        if dims.is_empty() {
            sectors[0].label = "all".into();
        }
        Self { dims, members, sectors }
    }

    fn member_index(&self, sector: usize, dim: GroupDim) -> usize {
        self.sectors[sector]
            .members
            .iter()
            .find(|(d, _)| *d == dim)
            .map(|(_, k)| *k)
            .expect("sector covers every grouped dimension")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTable {
    pub interval: Interval,
    pub mode: Mode,
    pub target_t0: f64,
    pub target_t1: f64,
    /// `target(t1) - target(t0)` in the target's reporting unit.
    pub delta_total: f64,
    pub factors: Vec<String>,
    /// Effects in identity factor order.
    pub effects: Vec<f64>,
    /// Sectoral mode only.
    pub sectors: Option<SectorLayout>,
    /// `sector_effects[factor][sector]`, sectoral mode only.
    pub sector_effects: Option<Vec<Vec<f64>>>,
}

impl EffectTable {
    pub fn effect(&self, factor: &str) -> Option<f64> {
        self.factors.iter().position(|f| f == factor).map(|i| self.effects[i])
    }

    pub fn effects_sum(&self) -> f64 {
        self.effects.iter().sum()
    }

    /// Sum of a factor's sector effects grouped by the members of `dim`.
    pub fn member_marginals(&self, factor: usize, dim: GroupDim) -> Option<Vec<(String, f64)>> {
        let layout = self.sectors.as_ref()?;
        let cells = &self.sector_effects.as_ref()?[factor];
        let d = layout.dims.iter().position(|x| *x == dim)?;
        let mut out: Vec<(String, f64)> = layout.members[d].iter().map(|m| (m.clone(), 0.0)).collect();
        for (s, v) in cells.iter().enumerate() {
            out[layout.member_index(s, dim)].1 += v;
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainedResult {
    pub span: Interval,
    pub steps: Vec<EffectTable>,
}

impl ChainedResult {
    pub fn delta_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.delta_total).sum()
    }
}

// ---------------------------------------------------------------------------

/// Factor values for every panel year, shared by the interval decompositions
/// of one run.
pub struct FactorTable<'a> {
    spec: &'a IdentitySpec,
    panel: &'a PanelDataset,
    values: Vec<FactorValues>,
}

impl<'a> FactorTable<'a> {
    pub fn build(spec: &'a IdentitySpec, panel: &'a PanelDataset, exec: Execution) -> Result<Self> {
        let first = panel.first_year();
        let values = exec.try_map_indexed(panel.len(), |k| evaluate_factors(spec, panel, first + k as Year))?;
        Ok(Self { spec, panel, values })
    }

    pub fn year(&self, year: Year) -> Result<&FactorValues> {
        year.checked_sub(self.panel.first_year())
            .and_then(|k| usize::try_from(k).ok())
            .and_then(|k| self.values.get(k))
            .ok_or(Error::YearOutOfRange(year))
    }

    /// Largest value of a grouped factor's member over all years.
    fn member_max(&self, factor: usize, member: usize) -> f64 {
        self.values
            .iter()
            .filter_map(|v| v.factors[factor].members.as_ref().map(|m| m[member]))
            .fold(0.0, f64::max)
    }

    fn factor_member_max(&self, factor: usize) -> f64 {
        self.values
            .iter()
            .filter_map(|v| v.factors[factor].members.as_ref())
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }

    fn check_closure(&self, year: Year, tol: f64) -> Result<()> {
        let residual = closure_residual(self.spec, self.year(year)?);
        if residual.is_nan() || residual > tol {
            return Err(Error::ClosureFailure {
                year,
                residual,
                tolerance: tol,
            });
        }
        Ok(())
    }

    /// Applies the zero policy to a member value.
    fn member_value(&self, year: Year, factor: usize, member: usize, policy: ZeroPolicy) -> Result<f64> {
        let fv = &self.year(year)?.factors[factor];
        let v = fv.members.as_ref().expect("grouped factor")[member];
        if v > 0.0 {
            return Ok(v);
        }
        let reject = || Error::NonPositiveFactor {
            factor: fv.name.clone(),
            year,
            value: v,
        };
        match policy {
            ZeroPolicy::Reject => Err(reject()),
            ZeroPolicy::DeltaSubstitute if v == 0.0 => {
                let mut max = self.member_max(factor, member);
                if max <= 0.0 {
                    max = self.factor_member_max(factor);
                }
                if max > 0.0 {
                    Ok(ZERO_SUBSTITUTE_FRACTION * max)
                } else {
                    Err(reject())
                }
            }
            ZeroPolicy::DeltaSubstitute => Err(reject()),
        }
    }

    fn aggregate_value(&self, year: Year, factor: usize, policy: ZeroPolicy) -> Result<f64> {
        let fv = &self.year(year)?.factors[factor];
        if fv.value > 0.0 {
            return Ok(fv.value);
        }
        if policy == ZeroPolicy::DeltaSubstitute && fv.value == 0.0 {
            let max = self.factor_member_max(factor);
            if max > 0.0 {
                return Ok(ZERO_SUBSTITUTE_FRACTION * max);
            }
        }
        Err(Error::NonPositiveFactor {
            factor: fv.name.clone(),
            year,
            value: fv.value,
        })
    }

    pub fn decompose(&self, interval: Interval, options: &LmdiOptions) -> Result<EffectTable> {
        interval.check_within(self.panel)?;
        let (t0, t1) = (interval.t0, interval.t1);
        self.check_closure(t0, options.closure_tolerance)?;
        self.check_closure(t1, options.closure_tolerance)?;
        let v0 = self.year(t0)?;
        let v1 = self.year(t1)?;
        let factors: Vec<String> = self.spec.factors.iter().map(|f| f.name.clone()).collect();
        let n = factors.len();

        let (effects, sectors, sector_effects) = match options.mode {
            Mode::Aggregate => {
                let w = log_mean_with(v1.target, v0.target, options.log_mean)?;
                let effects = (0..n)
                    .map(|f| {
                        let x0 = self.aggregate_value(t0, f, options.zero_policy)?;
                        let x1 = self.aggregate_value(t1, f, options.zero_policy)?;
                        Ok(w * (x1 / x0).ln())
                    })
                    .collect::<Result<Vec<f64>>>()?;
                (effects, None, None)
            }
            Mode::Sectoral => {
                let layout = SectorLayout::for_identity(self.spec, self.panel);
                let mut cells = vec![vec![0.0; layout.sectors.len()]; n];
                let mut x0 = vec![0.0; n];
                let mut x1 = vec![0.0; n];
                #[allow(clippy::needless_range_loop)]
                for s in 0..layout.sectors.len() {
                    for (f, spec) in self.spec.factors.iter().enumerate() {
                        match spec.group {
                            Some(dim) => {
                                let m = layout.member_index(s, dim);
                                x0[f] = self.member_value(t0, f, m, options.zero_policy)?;
                                x1[f] = self.member_value(t1, f, m, options.zero_policy)?;
                            }
                            None => {
                                x0[f] = self.aggregate_value(t0, f, options.zero_policy)?;
                                x1[f] = self.aggregate_value(t1, f, options.zero_policy)?;
                            }
                        }
                    }
                    let scale = self.spec.target.scale;
                    let c0 = x0.iter().fold(scale, |a, x| a * x);
                    let c1 = x1.iter().fold(scale, |a, x| a * x);
                    let w = log_mean_with(c1, c0, options.log_mean)?;
                    for f in 0..n {
                        cells[f][s] = w * (x1[f] / x0[f]).ln();
                    }
                }
                let effects = cells.iter().map(|row| row.iter().sum()).collect();
                (effects, Some(layout), Some(cells))
            }
        };

        Ok(EffectTable {
            interval,
            mode: options.mode,
            target_t0: v0.target,
            target_t1: v1.target,
            delta_total: v1.target - v0.target,
            factors,
            effects,
            sectors,
            sector_effects,
        })
    }
}

/// Decomposes the change of the identity's target between two years.
pub fn decompose_interval(
    spec: &IdentitySpec,
    panel: &PanelDataset,
    interval: Interval,
    options: &LmdiOptions,
) -> Result<EffectTable> {
    interval.check_within(panel)?;
    FactorTable::build(spec, panel, Execution::Sequential)?.decompose(interval, options)
}

/// Decomposes several (possibly non-adjacent) intervals against one panel.
pub fn decompose_intervals(
    spec: &IdentitySpec,
    panel: &PanelDataset,
    intervals: &[Interval],
    options: &LmdiOptions,
    exec: Execution,
) -> Result<Vec<EffectTable>> {
    let table = FactorTable::build(spec, panel, exec)?;
    exec.try_map_indexed(intervals.len(), |k| table.decompose(intervals[k], options))
}

/// One decomposition per consecutive year pair of `span`.
pub fn chain_decompose(
    spec: &IdentitySpec,
    panel: &PanelDataset,
    span: Interval,
    options: &LmdiOptions,
) -> Result<ChainedResult> {
    chain_decompose_with(spec, panel, span, options, Execution::default())
}

pub fn chain_decompose_with(
    spec: &IdentitySpec,
    panel: &PanelDataset,
    span: Interval,
    options: &LmdiOptions,
    exec: Execution,
) -> Result<ChainedResult> {
    span.check_within(panel)?;
    let intervals: Vec<Interval> = (span.t0..span.t1).map(|t| Interval { t0: t, t1: t + 1 }).collect();
    let steps = decompose_intervals(spec, panel, &intervals, options, exec)?;
    Ok(ChainedResult { span, steps })
}

/// Splits a grouped factor's effect across its members with weights
/// `L(m(t1), m(t0)) / sum_k L(m_k(t1), m_k(t0))`.
pub fn attribute_group(effect: f64, members_t0: &[f64], members_t1: &[f64]) -> Result<Vec<f64>> {
    if members_t0.is_empty() {
        return Err(Error::EmptyMembers);
    }
    if members_t0.len() != members_t1.len() {
        return Err(Error::InvalidArgument(format!(
            "member counts differ: {} vs {}",
            members_t0.len(),
            members_t1.len()
        )));
    }
    let weights = members_t0
        .iter()
        .zip(members_t1)
        .map(|(&a, &b)| log_mean(b, a))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| effect * (w / total)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_mean_cases() {
        assert_eq!(log_mean(5.0, 5.0).unwrap(), 5.0);
        let e2 = std::f64::consts::E.powi(2);
        assert_relative_eq!(log_mean(1.0, e2).unwrap(), (e2 - 1.0) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(log_mean(2.0, 8.0).unwrap(), 6.0 / 4f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(log_mean(2.0, 8.0).unwrap(), 4.328085122666891, max_relative = 1e-12);
        assert!(log_mean(0.0, 1.0).is_err());
        assert!(log_mean(-1.0, 1.0).is_err());
        assert_eq!(log_mean_with(3.0, 3.0, LogMeanVariant::ZeroOnTie).unwrap(), 0.0);
        assert_eq!(log_mean_with(3.0, 3.0, LogMeanVariant::AnalyticLimit).unwrap(), 3.0);
    }

    #[test]
    fn log_mean_near_tie_is_accurate() {
        let a = 1.0;
        let b = 1.0 + 1e-12;
        // L(a, b) ~ (a + b) / 2 for nearly equal arguments.
        assert_relative_eq!(log_mean(a, b).unwrap(), (a + b) / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn interval_must_move_forward() {
        assert!(Interval::new(2001, 2001).is_err());
        assert!(Interval::new(2002, 2001).is_err());
    }

    #[test]
    fn attribution_cases() {
        assert_eq!(attribute_group(3.0, &[1.0], &[2.0]).unwrap(), vec![3.0]);
        let eq = attribute_group(4.0, &[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(eq[0], eq[1]);
        // L(0.3, 0.2) = 0.1 / ln 1.5; L(0.3, 0.3) = 0.3.
        let l = 0.1 / 1.5f64.ln();
        let shares = attribute_group(1.0, &[0.2, 0.3], &[0.3, 0.3]).unwrap();
        assert_relative_eq!(shares[0], l / (l + 0.3), max_relative = 1e-12);
        assert_relative_eq!(shares[0], 0.451183, epsilon = 1e-6);
        assert_relative_eq!(shares[1], 0.548817, epsilon = 1e-6);
        assert!(matches!(attribute_group(1.0, &[], &[]), Err(Error::EmptyMembers)));
    }
}
