//! Annual panel of base quantities: loading, validation, unit normalisation
//! and the derived per-household series.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{convert_value, Unit};

pub type Year = i32;

/// Base symbols every residential panel must carry.
pub const REQUIRED_SYMBOLS: [&str; 7] = ["C", "E", "H", "P", "F", "I", "Pr"];

/// Relative tolerance for group members summing to their total.
pub const GROUP_SUM_TOLERANCE: f64 = 1e-6;

/// MtCO2 per million households expressed in kgCO2 per household.
pub const KG_PER_HOUSEHOLD_SCALE: f64 = 1000.0;

pub const DEFAULT_AGE_GROUPS: [&str; 3] = ["0_14", "15_64", "65p"];
pub const DEFAULT_CARRIERS: [&str; 5] = ["coal", "oil", "gas", "elec", "heat"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupDim {
    Age,
    Carrier,
}

impl GroupDim {
    pub fn name(self) -> &'static str {
        match self {
            GroupDim::Age => "age",
            GroupDim::Carrier => "carrier",
        }
    }

    /// Column header used for a member series in panel files.
    pub fn column_name(self, base: &str, member: &str) -> String {
        match self {
            GroupDim::Age => format!("{base}_age_{member}"),
            GroupDim::Carrier => format!("{base}_{member}"),
        }
    }
}

impl fmt::Display for GroupDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One symbol's values over the panel's contiguous year range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitySeries {
    pub name: String,
    pub unit: Unit,
    pub first_year: Year,
    pub values: Vec<f64>,
}

impl QuantitySeries {
    pub fn get(&self, year: Year) -> Option<f64> {
        let idx = year.checked_sub(self.first_year)?;
        usize::try_from(idx).ok().and_then(|i| self.values.get(i).copied())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Members of one group dimension and their per-base-symbol series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBreakdown {
    pub members: Vec<String>,
    /// Base symbol -> one series per member, in `members` order.
    pub series: BTreeMap<String, Vec<QuantitySeries>>,
}

impl GroupBreakdown {
    pub fn member_series(&self, base: &str) -> Option<&[QuantitySeries]> {
        self.series.get(base).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    first_year: Year,
    len: usize,
    series: BTreeMap<String, QuantitySeries>,
    groups: BTreeMap<GroupDim, GroupBreakdown>,
}

impl PanelDataset {
    /// Empty panel over `first_year ..= first_year + len - 1`.
    pub fn new(first_year: Year, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyPanel);
        }
        Ok(Self {
            first_year,
            len,
            series: BTreeMap::new(),
            groups: BTreeMap::new(),
        })
    }

    /// Adds (or replaces) an ungrouped series. Values must be finite and
    /// strictly positive.
    pub fn with_series(mut self, symbol: &str, unit: Unit, values: Vec<f64>) -> Result<Self> {
        self.check_values(symbol, &values, false)?;
        self.series.insert(
            symbol.to_string(),
            QuantitySeries {
                name: symbol.to_string(),
                unit,
                first_year: self.first_year,
                values,
            },
        );
        Ok(self)
    }

    /// Adds (or replaces) a grouped base symbol. `members` holds
    /// `(label, values)` pairs in declaration order; member values must be
    /// finite and non-negative. Every base symbol of a dimension must use the
    /// same member list.
    pub fn with_group_series(
        mut self,
        dim: GroupDim,
        base: &str,
        unit: Unit,
        members: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyMembers);
        }
        let labels: Vec<String> = members.iter().map(|(l, _)| l.clone()).collect();
        let mut series = Vec::with_capacity(members.len());
        for (label, values) in members {
            let name = member_key(base, &label);
            self.check_values(&name, &values, true)?;
            series.push(QuantitySeries {
                name,
                unit,
                first_year: self.first_year,
                values,
            });
        }
        let group = self.groups.entry(dim).or_insert_with(|| GroupBreakdown {
            members: labels.clone(),
            series: BTreeMap::new(),
        });
        if group.members != labels {
            return Err(Error::InvalidArgument(format!(
                "{dim} members {labels:?} differ from previously declared {:?}",
                group.members
            )));
        }
        group.series.insert(base.to_string(), series);
        Ok(self)
    }

    fn check_values(&self, name: &str, values: &[f64], allow_zero: bool) -> Result<()> {
        if values.len() != self.len {
            return Err(Error::SeriesLength {
                symbol: name.to_string(),
                got: values.len(),
                expected: self.len,
            });
        }
        for (year, &v) in self.years().zip(values) {
            let ok = v.is_finite() && if allow_zero { v >= 0.0 } else { v > 0.0 };
            if !ok {
                return Err(Error::NonPositive {
                    symbol: name.to_string(),
                    year,
                    value: v,
                });
            }
        }
        Ok(())
    }

    pub fn first_year(&self) -> Year {
        self.first_year
    }

    pub fn last_year(&self) -> Year {
        self.first_year + self.len as Year - 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn years(&self) -> RangeInclusive<Year> {
        self.first_year..=self.last_year()
    }

    pub fn contains_year(&self, year: Year) -> bool {
        self.years().contains(&year)
    }

    pub fn series(&self, symbol: &str) -> Option<&QuantitySeries> {
        self.series.get(symbol)
    }

    pub fn all_series(&self) -> impl Iterator<Item = &QuantitySeries> {
        self.series.values()
    }

    pub fn group(&self, dim: GroupDim) -> Option<&GroupBreakdown> {
        self.groups.get(&dim)
    }

    pub fn groups(&self) -> impl Iterator<Item = (GroupDim, &GroupBreakdown)> {
        self.groups.iter().map(|(d, g)| (*d, g))
    }

    pub fn value(&self, symbol: &str, year: Year) -> Result<f64> {
        let s = self
            .series
            .get(symbol)
            .ok_or_else(|| Error::MissingSymbol(symbol.to_string()))?;
        s.get(year).ok_or(Error::YearOutOfRange(year))
    }

    /// Value of `symbol` converted to `unit`.
    pub fn value_in(&self, symbol: &str, year: Year, unit: Unit) -> Result<f64> {
        let s = self
            .series
            .get(symbol)
            .ok_or_else(|| Error::MissingSymbol(symbol.to_string()))?;
        let v = s.get(year).ok_or(Error::YearOutOfRange(year))?;
        convert_value(v, s.unit, unit)
    }

    /// Member values of a grouped base symbol for one year, in member order.
    pub fn member_values(&self, dim: GroupDim, base: &str, year: Year) -> Result<Vec<f64>> {
        let series = self
            .groups
            .get(&dim)
            .and_then(|g| g.member_series(base))
            .ok_or_else(|| Error::MissingSymbol(format!("{base}[{dim}]")))?;
        series
            .iter()
            .map(|s| s.get(year).ok_or(Error::YearOutOfRange(year)))
            .collect()
    }
}

pub fn member_key(base: &str, member: &str) -> String {
    format!("{base}[{member}]")
}

// ---------------------------------------------------------------------------
// Schema descriptor

fn default_delimiter() -> String {
    ",".to_string()
}

fn default_year_column() -> String {
    "year".to_string()
}

/// Maps file columns to base-quantity symbols and their units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSchema {
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_year_column")]
    pub year_column: String,
    pub columns: Vec<ColumnSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub column: String,
    pub symbol: String,
    pub unit: Unit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupDim>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member: Option<String>,
}

impl ColumnSpec {
    fn plain(column: &str, unit: Unit) -> Self {
        Self {
            column: column.to_string(),
            symbol: column.to_string(),
            unit,
            group: None,
            member: None,
        }
    }

    fn grouped(dim: GroupDim, base: &str, member: &str, unit: Unit) -> Self {
        Self {
            column: dim.column_name(base, member),
            symbol: base.to_string(),
            unit,
            group: Some(dim),
            member: Some(member.to_string()),
        }
    }
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self::residential(&DEFAULT_AGE_GROUPS, &DEFAULT_CARRIERS)
    }
}

impl PanelSchema {
    /// Default column layout with the given age groups and carriers.
    pub fn residential(ages: &[&str], carriers: &[&str]) -> Self {
        let mut columns = vec![
            ColumnSpec::plain("C", Unit::MtCo2),
            ColumnSpec::plain("E", Unit::Mtce),
            ColumnSpec::plain("H", Unit::MillionHouseholds),
            ColumnSpec::plain("P", Unit::MillionPersons),
            ColumnSpec::plain("F", Unit::MillionSquareMetres),
            ColumnSpec::plain("I", Unit::Currency),
            ColumnSpec::plain("Pr", Unit::CurrencyPerSquareMetre),
        ];
        for a in ages {
            columns.push(ColumnSpec::grouped(GroupDim::Age, "P", a, Unit::MillionPersons));
        }
        for c in carriers {
            columns.push(ColumnSpec::grouped(GroupDim::Carrier, "E", c, Unit::Mtce));
        }
        for c in carriers {
            columns.push(ColumnSpec::grouped(GroupDim::Carrier, "C", c, Unit::MtCo2));
        }
        Self {
            delimiter: default_delimiter(),
            year_column: default_year_column(),
            columns,
        }
    }

    pub fn from_toml_str(s: &str) -> std::result::Result<Self, String> {
        let schema: PanelSchema = toml::from_str(s).map_err(|e| e.to_string())?;
        schema.check()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|message| Error::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    fn delimiter_byte(&self) -> std::result::Result<u8, String> {
        match self.delimiter.as_bytes() {
            [b] => Ok(*b),
            _ if self.delimiter == "\\t" => Ok(b'\t'),
            _ => Err(format!("delimiter must be a single byte, got {:?}", self.delimiter)),
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        self.delimiter_byte()?;
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.column.as_str()) {
                return Err(format!("column {:?} mapped twice", c.column));
            }
            if c.group.is_some() != c.member.is_some() {
                return Err(format!(
                    "column {:?}: group and member must be given together",
                    c.column
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Loading

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub year: Option<Year>,
    pub symbol: Option<String>,
    pub message: String,
}

impl Finding {
    fn new(severity: Severity, year: Option<Year>, symbol: Option<&str>, message: String) -> Self {
        Self {
            severity,
            year,
            symbol: symbol.map(str::to_string),
            message,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub status: Status,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn from_findings(findings: Vec<Finding>) -> Self {
        let status = if findings.iter().any(|f| f.severity == Severity::Error) {
            Status::Fail
        } else {
            Status::Pass
        };
        Self { status, findings }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Appends findings and recomputes the status.
    pub fn merged(mut self, other: Vec<Finding>) -> Self {
        self.findings.extend(other);
        Self::from_findings(self.findings)
    }
}

/// A freshly loaded panel together with non-fatal load findings.
#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub panel: PanelDataset,
    pub findings: Vec<Finding>,
}

pub fn load_panel(path: &Path, schema: &PanelSchema) -> Result<LoadedPanel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_panel(&text, schema)
}

/// Parses delimiter-separated panel text according to `schema`; values are
/// converted to canonical units.
type MemberColumns = Vec<(String, Vec<f64>)>;

pub fn parse_panel(text: &str, schema: &PanelSchema) -> Result<LoadedPanel> {
    let delimiter = schema.delimiter_byte().map_err(Error::InvalidArgument)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let index_of = |name: &str| headers.iter().position(|h| h == name);

    let year_idx = index_of(&schema.year_column).ok_or_else(|| Error::MissingColumn(schema.year_column.clone()))?;

    let mut findings = Vec::new();
    let mapped: BTreeSet<&str> = schema.columns.iter().map(|c| c.column.as_str()).collect();
    for h in &headers {
        if h != &schema.year_column && !mapped.contains(h.as_str()) {
            findings.push(Finding::new(
                Severity::Warning,
                None,
                None,
                format!("unknown column {h:?} ignored"),
            ));
        }
    }

    // Resolve which schema columns are present. Ungrouped required symbols
    // must exist; a group dimension must be entirely present or absent.
    let mut dims_seen: BTreeMap<GroupDim, (usize, usize)> = BTreeMap::new();
    for c in &schema.columns {
        if let Some(dim) = c.group {
            let e = dims_seen.entry(dim).or_default();
            e.0 += 1;
            if index_of(&c.column).is_some() {
                e.1 += 1;
            }
        }
    }
    for sym in REQUIRED_SYMBOLS {
        let col = schema
            .columns
            .iter()
            .find(|c| c.group.is_none() && c.symbol == sym)
            .ok_or_else(|| Error::MissingColumn(sym.to_string()))?;
        if index_of(&col.column).is_none() {
            return Err(Error::MissingColumn(col.column.clone()));
        }
    }
    let mut active: Vec<(&ColumnSpec, usize)> = Vec::new();
    for c in &schema.columns {
        match (index_of(&c.column), c.group) {
            (Some(i), _) => active.push((c, i)),
            (None, Some(dim)) => {
                let (declared, present) = dims_seen[&dim];
                if present > 0 && present < declared {
                    return Err(Error::MissingColumn(c.column.clone()));
                }
            }
            (None, None) => findings.push(Finding::new(
                Severity::Warning,
                None,
                Some(&c.symbol),
                format!("optional column {:?} absent", c.column),
            )),
        }
    }

    let mut rows: Vec<(Year, Vec<f64>)> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_no + 1;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let year_text = cell(year_idx);
        let year: Year = year_text.parse().map_err(|_| Error::NonNumeric {
            column: schema.year_column.clone(),
            row,
            value: year_text.to_string(),
        })?;
        let mut values = Vec::with_capacity(active.len());
        for (spec, idx) in &active {
            let text = cell(*idx);
            let v: f64 = text
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    column: spec.column.clone(),
                    row,
                    value: text.to_string(),
                })?;
            let bad = if spec.group.is_some() { v < 0.0 } else { v <= 0.0 };
            if bad {
                return Err(Error::NonPositive {
                    symbol: spec.column.clone(),
                    year,
                    value: v,
                });
            }
            values.push(convert_value(v, spec.unit, spec.unit.canonical())?);
        }
        rows.push((year, values));
    }
    if rows.is_empty() {
        return Err(Error::EmptyPanel);
    }
    rows.sort_by_key(|(y, _)| *y);
    for w in rows.windows(2) {
        let (prev, next) = (w[0].0, w[1].0);
        if prev == next {
            return Err(Error::DuplicateYear(prev));
        }
        if next != prev + 1 {
            return Err(Error::NonContiguousYears { prev, next });
        }
    }

    let column = |k: usize| rows.iter().map(|(_, v)| v[k]).collect::<Vec<f64>>();
    let mut panel = PanelDataset::new(rows[0].0, rows.len())?;
    // Grouped columns collected per (dim, base) in schema order.
    let mut grouped: BTreeMap<(GroupDim, String), (Unit, MemberColumns)> = BTreeMap::new();
    let mut group_order: Vec<(GroupDim, String)> = Vec::new();
    for (k, (spec, _)) in active.iter().enumerate() {
        let unit = spec.unit.canonical();
        match (&spec.group, &spec.member) {
            (Some(dim), Some(member)) => {
                let key = (*dim, spec.symbol.clone());
                if !grouped.contains_key(&key) {
                    group_order.push(key.clone());
                }
                grouped
                    .entry(key)
                    .or_insert_with(|| (unit, Vec::new()))
                    .1
                    .push((member.clone(), column(k)));
            }
            _ => panel = panel.with_series(&spec.symbol, unit, column(k))?,
        }
    }
    for key in group_order {
        let (unit, members) = grouped.remove(&key).expect("collected above");
        panel = panel.with_group_series(key.0, &key.1, unit, members)?;
    }
    Ok(LoadedPanel { panel, findings })
}

// ---------------------------------------------------------------------------
// Serialization

impl PanelDataset {
    /// Schema describing the layout written by [`PanelDataset::to_csv_string`].
    pub fn schema(&self) -> PanelSchema {
        let mut columns: Vec<ColumnSpec> = self
            .series
            .values()
            .map(|s| ColumnSpec::plain(&s.name, s.unit))
            .collect();
        for (dim, g) in &self.groups {
            for (base, series) in &g.series {
                for (member, s) in g.members.iter().zip(series) {
                    columns.push(ColumnSpec::grouped(*dim, base, member, s.unit));
                }
            }
        }
        PanelSchema {
            delimiter: default_delimiter(),
            year_column: default_year_column(),
            columns,
        }
    }

    /// Writes the panel as comma-separated text in canonical units, using
    /// shortest round-trip float formatting.
    pub fn to_csv_string(&self) -> String {
        let schema = self.schema();
        let mut out = String::new();
        out.push_str(&schema.year_column);
        for c in &schema.columns {
            out.push(',');
            out.push_str(&c.column);
        }
        out.push('\n');
        for (k, year) in self.years().enumerate() {
            out.push_str(&year.to_string());
            for s in self.series.values() {
                out.push(',');
                out.push_str(&format!("{:?}", s.values[k]));
            }
            for g in self.groups.values() {
                for series in g.series.values() {
                    for s in series {
                        out.push(',');
                        out.push_str(&format!("{:?}", s.values[k]));
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.schema.toml` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv_path = dir.join(format!("{stem}.csv"));
        let schema_path = dir.join(format!("{stem}.schema.toml"));
        fs::write(&csv_path, self.to_csv_string()).map_err(|e| Error::io(&csv_path, e))?;
        fs::write(&schema_path, self.schema().to_toml_string()).map_err(|e| Error::io(&schema_path, e))?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Validation

struct GroupCheck {
    dim: GroupDim,
    base: &'static str,
    label: &'static str,
}

const GROUP_CHECKS: [GroupCheck; 3] = [
    GroupCheck {
        dim: GroupDim::Age,
        base: "P",
        label: "age population",
    },
    GroupCheck {
        dim: GroupDim::Carrier,
        base: "E",
        label: "carrier energy",
    },
    GroupCheck {
        dim: GroupDim::Carrier,
        base: "C",
        label: "carrier emission",
    },
];

/// Checks the panel invariants. Findings are data: this never fails.
pub fn validate_panel(panel: &PanelDataset) -> ValidationReport {
    let mut findings = Vec::new();
    for sym in REQUIRED_SYMBOLS {
        if panel.series(sym).is_none() {
            findings.push(Finding::new(
                Severity::Error,
                None,
                Some(sym),
                format!("missing required symbol {sym}"),
            ));
        }
    }
    for s in panel.all_series() {
        for (year, &v) in panel.years().zip(&s.values) {
            if !(v.is_finite() && v > 0.0) {
                findings.push(Finding::new(
                    Severity::Error,
                    Some(year),
                    Some(&s.name),
                    format!("non-positive stock value {v}"),
                ));
            }
        }
    }
    if panel.groups.is_empty() {
        findings.push(Finding::new(
            Severity::Info,
            None,
            None,
            "no group dimensions".to_string(),
        ));
    } else {
        for dim in [GroupDim::Age, GroupDim::Carrier] {
            if panel.group(dim).is_none() {
                findings.push(Finding::new(Severity::Info, None, None, format!("no {dim} breakdown")));
            }
        }
    }
    for check in &GROUP_CHECKS {
        let Some(group) = panel.group(check.dim) else {
            continue;
        };
        let Some(members) = group.member_series(check.base) else {
            continue;
        };
        let Some(total) = panel.series(check.base) else {
            continue;
        };
        for (k, year) in panel.years().enumerate() {
            let sum: f64 = members.iter().map(|m| m.values[k]).sum();
            let residual = ((sum - total.values[k]) / total.values[k]).abs();
            if residual.is_nan() || residual > GROUP_SUM_TOLERANCE {
                findings.push(Finding::new(
                    Severity::Error,
                    Some(year),
                    Some(check.base),
                    format!("{} sum residual {residual:.1e}", check.label),
                ));
            }
        }
    }
    ValidationReport::from_findings(findings)
}

/// Rescales group members so that every checked group sum matches its total
/// exactly (up to rounding).
pub fn renormalize_groups(panel: &PanelDataset) -> PanelDataset {
    let mut out = panel.clone();
    for check in &GROUP_CHECKS {
        let Some(total) = panel.series(check.base) else {
            continue;
        };
        let Some(members) = out
            .groups
            .get_mut(&check.dim)
            .and_then(|g| g.series.get_mut(check.base))
        else {
            continue;
        };
        for k in 0..panel.len {
            let sum: f64 = members.iter().map(|m| m.values[k]).sum();
            if sum > 0.0 {
                let scale = total.values[k] / sum;
                for m in members.iter_mut() {
                    m.values[k] *= scale;
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Derived quantities

/// Symbols added by [`derive_quantities`].
pub const DERIVED_SYMBOLS: [&str; 8] = ["c_h", "p", "i", "r", "d", "e", "K", "s"];

/// Adds the per-household intensity and identity factor series: `c_h = C/H`
/// (kgCO2 per household), `p = P/H`, `i = I/P`, `r = F*Pr/I`, `d = 1/Pr`,
/// `e = E/F`, `K = C/E`, plus age shares `s[j] = P_j/P` and carrier emission
/// factors `K[l] = C_l/E` when the breakdowns exist. Re-deriving overwrites
/// the previous values, so the operation is idempotent.
pub fn derive_quantities(panel: &PanelDataset) -> Result<PanelDataset> {
    let col = |sym: &str| -> Result<Vec<f64>> {
        let s = panel.series(sym).ok_or_else(|| Error::MissingSymbol(sym.to_string()))?;
        panel
            .years()
            .map(|y| convert_value(s.get(y).expect("in range"), s.unit, s.unit.canonical()))
            .collect()
    };
    let (c, e, h, p, f, i, pr) = (
        col("C")?,
        col("E")?,
        col("H")?,
        col("P")?,
        col("F")?,
        col("I")?,
        col("Pr")?,
    );
    let zip = |a: &[f64], b: &[f64], op: fn(f64, f64) -> f64| -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| op(x, y)).collect()
    };
    let c_h: Vec<f64> = zip(&c, &h, |c, h| KG_PER_HOUSEHOLD_SCALE * c / h);
    let r: Vec<f64> = (0..panel.len).map(|k| f[k] * pr[k] / i[k]).collect();
    let mut out = panel
        .clone()
        .with_series("c_h", Unit::KgCo2PerHousehold, c_h)?
        .with_series("p", Unit::Dimensionless, zip(&p, &h, |a, b| a / b))?
        .with_series("i", Unit::Derived, zip(&i, &p, |a, b| a / b))?
        .with_series("r", Unit::Derived, r)?
        .with_series("d", Unit::Derived, pr.iter().map(|v| 1.0 / v).collect())?
        .with_series("e", Unit::TcePerSquareMetre, zip(&e, &f, |a, b| a / b))?
        .with_series("K", Unit::TCo2PerTce, zip(&c, &e, |a, b| a / b))?;

    if let Some(g) = panel.group(GroupDim::Age) {
        if let Some(members) = g.member_series("P") {
            let shares = g
                .members
                .iter()
                .zip(members)
                .map(|(label, s)| {
                    let v = zip(&s.values, &p, |a, b| a / b);
                    (label.clone(), v)
                })
                .collect();
            out = out.with_group_series(GroupDim::Age, "s", Unit::Dimensionless, shares)?;
        }
    }
    if let Some(g) = panel.group(GroupDim::Carrier) {
        if let Some(members) = g.member_series("C") {
            let factors = g
                .members
                .iter()
                .zip(members)
                .map(|(label, s)| (label.clone(), zip(&s.values, &e, |a, b| a / b)))
                .collect();
            out = out.with_group_series(GroupDim::Carrier, "K", Unit::TCo2PerTce, factors)?;
        }
    }
    Ok(out)
}
