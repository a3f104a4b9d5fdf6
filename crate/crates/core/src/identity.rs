//! Kaya-style multiplicative identities over panel symbols.
//!
//! An identity writes a target quantity (household CO2 intensity for the
//! builtin) as an ordered product of factors, each a signed-integer power
//! product of panel symbols. A factor may be *grouped*: it is then a sum over
//! the members of an age or carrier breakdown, and terms flagged `member`
//! resolve to that member's series.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupDim, PanelDataset, Status, Year, KG_PER_HOUSEHOLD_SCALE};
use crate::error::{Error, Result};
use crate::units::Unit;

/// Default relative tolerance for [`check_closure`].
pub const DEFAULT_CLOSURE_TOLERANCE: f64 = 1e-9;

/// Member label used when a grouped factor is evaluated on a panel that has
/// no breakdown for its dimension.
pub const IMPLICIT_MEMBER: &str = "total";

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub symbol: String,
    pub exponent: i32,
    #[serde(default, skip_serializing_if = "is_false")]
    pub member: bool,
}

impl Term {
    pub fn new(symbol: &str, exponent: i32) -> Self {
        Self {
            symbol: symbol.to_string(),
            exponent,
            member: false,
        }
    }

    pub fn member(symbol: &str, exponent: i32) -> Self {
        Self {
            member: true,
            ..Self::new(symbol, exponent)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupDim>,
    pub terms: Vec<Term>,
}

impl FactorSpec {
    pub fn new(name: &str, terms: Vec<Term>) -> Self {
        Self {
            name: name.to_string(),
            group: None,
            terms,
        }
    }

    pub fn grouped(name: &str, group: GroupDim, terms: Vec<Term>) -> Self {
        Self {
            name: name.to_string(),
            group: Some(group),
            terms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub unit: Unit,
    /// Multiplier taking the raw symbol product to the reporting unit.
    pub scale: f64,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySpec {
    pub name: String,
    pub target: TargetSpec,
    pub factors: Vec<FactorSpec>,
}

impl IdentitySpec {
    pub fn new(name: &str, target: TargetSpec, factors: Vec<FactorSpec>) -> Result<Self> {
        let spec = Self {
            name: name.to_string(),
            target,
            factors,
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidIdentity(msg));
        if !(self.target.scale.is_finite() && self.target.scale > 0.0) {
            return bad(format!("target scale must be positive, got {}", self.target.scale));
        }
        if self.target.terms.is_empty() {
            return bad("target has no terms".into());
        }
        for t in &self.target.terms {
            if t.member {
                return bad(format!("target term {} cannot be a group member", t.symbol));
            }
            if t.exponent == 0 {
                return bad(format!("target term {} has zero exponent", t.symbol));
            }
        }
        if self.factors.is_empty() {
            return bad("identity has no factors".into());
        }
        let mut names = BTreeSet::new();
        let mut dims = BTreeSet::new();
        for f in &self.factors {
            if !names.insert(f.name.as_str()) {
                return bad(format!("duplicate factor {}", f.name));
            }
            if f.terms.is_empty() {
                return bad(format!("factor {} has no terms", f.name));
            }
            if let Some(t) = f.terms.iter().find(|t| t.exponent == 0) {
                return bad(format!("factor {}: term {} has zero exponent", f.name, t.symbol));
            }
            let has_member = f.terms.iter().any(|t| t.member);
            match f.group {
                Some(dim) => {
                    if !has_member {
                        return bad(format!("grouped factor {} has no member term", f.name));
                    }
                    if !dims.insert(dim) {
                        return bad(format!(
                            "two grouped factors over the {dim} dimension; sectors would not sum to the target"
                        ));
                    }
                }
                None if has_member => {
                    return bad(format!("factor {} has member terms but no group", f.name));
                }
                None => {}
            }
        }
        if dims.len() > 2 {
            return bad("at most two grouped factors are supported".into());
        }
        Ok(())
    }

    /// Grouped dimensions in factor order.
    pub fn group_dims(&self) -> Vec<GroupDim> {
        self.factors.iter().filter_map(|f| f.group).collect()
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn factor_names(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|f| f.name.as_str())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: IdentitySpec = toml::from_str(s).map_err(|e| Error::InvalidIdentity(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("identity serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

/// The seven-factor household intensity identity
/// `c_h = p * S * r * i * d * e * K` with
/// `p = P/H`, `S = sum_j P_j/P`, `r = F*Pr/I`, `i = I/P`, `d = 1/Pr`,
/// `e = E/F`, `K = sum_l C_l/E`. The product telescopes to `C/H`.
pub fn builtin_residential_identity() -> IdentitySpec {
    IdentitySpec::new(
        "residential-household-intensity",
        TargetSpec {
            name: "c_h".into(),
            unit: Unit::KgCo2PerHousehold,
            scale: KG_PER_HOUSEHOLD_SCALE,
            terms: vec![Term::new("C", 1), Term::new("H", -1)],
        },
        vec![
            FactorSpec::new("p", vec![Term::new("P", 1), Term::new("H", -1)]),
            FactorSpec::grouped("S", GroupDim::Age, vec![Term::member("P", 1), Term::new("P", -1)]),
            FactorSpec::new("r", vec![Term::new("F", 1), Term::new("Pr", 1), Term::new("I", -1)]),
            FactorSpec::new("i", vec![Term::new("I", 1), Term::new("P", -1)]),
            FactorSpec::new("d", vec![Term::new("Pr", -1)]),
            FactorSpec::new("e", vec![Term::new("E", 1), Term::new("F", -1)]),
            FactorSpec::grouped("K", GroupDim::Carrier, vec![Term::member("C", 1), Term::new("E", -1)]),
        ],
    )
    .expect("builtin identity is well formed")
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, PartialEq)]
pub struct FactorValue {
    pub name: String,
    pub value: f64,
    /// Member values for grouped factors, in member order.
    pub members: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorValues {
    pub year: Year,
    /// Target in its reporting unit.
    pub target: f64,
    pub factors: Vec<FactorValue>,
}

impl FactorValues {
    pub fn get(&self, name: &str) -> Option<&FactorValue> {
        self.factors.iter().find(|f| f.name == name)
    }

    /// Reporting-unit product of all factor values.
    pub fn product(&self, scale: f64) -> f64 {
        self.factors.iter().fold(scale, |acc, f| acc * f.value)
    }
}

/// Member labels a grouped dimension resolves to on `panel`.
pub fn group_members(panel: &PanelDataset, dim: GroupDim) -> Vec<String> {
    panel
        .group(dim)
        .map(|g| g.members.clone())
        .unwrap_or_else(|| vec![IMPLICIT_MEMBER.to_string()])
}

/// Power product of `terms` as `(numerator, denominator)`; member terms are
/// resolved through `member` when given and skipped otherwise.
fn power_product(
    terms: &[Term],
    panel: &PanelDataset,
    year: Year,
    member: Option<(GroupDim, usize)>,
) -> Result<(f64, f64)> {
    let (mut num, mut den) = (1.0, 1.0);
    for t in terms {
        let v = match (t.member, member) {
            (false, None) => panel.value(&t.symbol, year)?,
            (true, Some((dim, k))) => {
                if panel.group(dim).is_some() {
                    panel.member_values(dim, &t.symbol, year)?[k]
                } else {
                    panel.value(&t.symbol, year)?
                }
            }
            _ => continue,
        };
        if t.exponent > 0 {
            num *= v.powi(t.exponent);
        } else {
            den *= v.powi(-t.exponent);
        }
    }
    Ok((num, den))
}

fn plain_product(terms: &[Term], panel: &PanelDataset, year: Year) -> Result<f64> {
    let (num, den) = power_product(terms, panel, year, None)?;
    Ok(num / den)
}

/// Grouped factor value and its member values. The value is formed as
/// `(sum of member parts) * common part` so that shares summing exactly to
/// their total give exactly one.
fn grouped_value(factor: &FactorSpec, dim: GroupDim, panel: &PanelDataset, year: Year) -> Result<(f64, Vec<f64>)> {
    let (cn, cd) = power_product(&factor.terms, panel, year, None)?;
    let n = group_members(panel, dim).len();
    let parts = (0..n)
        .map(|k| {
            let (mn, md) = power_product(&factor.terms, panel, year, Some((dim, k)))?;
            Ok(mn / md)
        })
        .collect::<Result<Vec<f64>>>()?;
    let value = parts.iter().sum::<f64>() * cn / cd;
    let members = parts.iter().map(|m| m * cn / cd).collect();
    Ok((value, members))
}

pub fn evaluate_target(spec: &IdentitySpec, panel: &PanelDataset, year: Year) -> Result<f64> {
    if !panel.contains_year(year) {
        return Err(Error::YearOutOfRange(year));
    }
    Ok(spec.target.scale * plain_product(&spec.target.terms, panel, year)?)
}

/// Evaluates every factor of `spec` for one year. Grouped factors also
/// return their member values, which sum to the factor value.
pub fn evaluate_factors(spec: &IdentitySpec, panel: &PanelDataset, year: Year) -> Result<FactorValues> {
    let target = evaluate_target(spec, panel, year)?;
    let factors = spec
        .factors
        .iter()
        .map(|f| match f.group {
            None => Ok(FactorValue {
                name: f.name.clone(),
                value: plain_product(&f.terms, panel, year)?,
                members: None,
            }),
            Some(dim) => {
                let (value, members) = grouped_value(f, dim, panel, year)?;
                Ok(FactorValue {
                    name: f.name.clone(),
                    value,
                    members: Some(members),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorValues { year, target, factors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    /// Per-year relative residual `|scale * prod(factors) - target| / target`.
    pub residuals: Vec<(Year, f64)>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub status: Status,
}

impl ClosureReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn worst(&self) -> Option<(Year, f64)> {
        self.residuals
            .iter()
            .copied()
            .fold(None, |acc: Option<(Year, f64)>, r| match acc {
                Some(a) if r.1.is_nan() || r.1 <= a.1 => Some(a),
                _ => Some(r),
            })
    }
}

pub fn closure_residual(spec: &IdentitySpec, values: &FactorValues) -> f64 {
    let product = values.product(spec.target.scale);
    ((product - values.target) / values.target).abs()
}

/// Checks the multiplicative closure of `spec` on every panel year.
pub fn check_closure(spec: &IdentitySpec, panel: &PanelDataset, tol: f64) -> Result<ClosureReport> {
    let residuals = panel
        .years()
        .map(|y| Ok((y, closure_residual(spec, &evaluate_factors(spec, panel, y)?))))
        .collect::<Result<Vec<_>>>()?;
    let max_residual =
        residuals
            .iter()
            .map(|r| r.1)
            .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    let status = if max_residual <= tol {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(ClosureReport {
        residuals,
        max_residual,
        tolerance: tol,
        status,
    })
}
