//! Unit tags and exact scale conversions.
//!
//! Every tag belongs to one [`Dimension`] and carries a power-of-ten scale
//! relative to that dimension's reference unit. Conversions are only allowed
//! within a dimension.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    Mass,
    Energy,
    Persons,
    Households,
    Area,
    Currency,
    CurrencyPerArea,
    Dimensionless,
    MassPerHousehold,
    MassPerPerson,
    MassPerArea,
    MassPerEnergy,
    EnergyPerArea,
    /// Ratio of canonical units with no named tag (e.g. income per person).
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "MtCO2")]
    MtCo2,
    #[serde(rename = "ktCO2")]
    KtCo2,
    #[serde(rename = "tCO2")]
    TCo2,
    #[serde(rename = "kgCO2")]
    KgCo2,
    #[serde(rename = "Mtce")]
    Mtce,
    #[serde(rename = "tce")]
    Tce,
    #[serde(rename = "million-persons")]
    MillionPersons,
    #[serde(rename = "persons")]
    Persons,
    #[serde(rename = "million-households")]
    MillionHouseholds,
    #[serde(rename = "households")]
    Households,
    #[serde(rename = "million-m2")]
    MillionSquareMetres,
    #[serde(rename = "m2")]
    SquareMetres,
    #[serde(rename = "currency")]
    Currency,
    #[serde(rename = "currency-per-m2")]
    CurrencyPerSquareMetre,
    #[serde(rename = "dimensionless")]
    Dimensionless,
    #[serde(rename = "kgCO2/household")]
    KgCo2PerHousehold,
    #[serde(rename = "MtCO2/million-households")]
    MtCo2PerMillionHouseholds,
    #[serde(rename = "kgCO2/person")]
    KgCo2PerPerson,
    #[serde(rename = "MtCO2/million-persons")]
    MtCo2PerMillionPersons,
    #[serde(rename = "kgCO2/m2")]
    KgCo2PerSquareMetre,
    #[serde(rename = "MtCO2/million-m2")]
    MtCo2PerMillionSquareMetres,
    #[serde(rename = "tCO2/tce")]
    TCo2PerTce,
    #[serde(rename = "kgCO2/tce")]
    KgCo2PerTce,
    #[serde(rename = "tce/m2")]
    TcePerSquareMetre,
    #[serde(rename = "derived")]
    Derived,
}

pub const ALL_UNITS: &[Unit] = &[
    Unit::MtCo2,
    Unit::KtCo2,
    Unit::TCo2,
    Unit::KgCo2,
    Unit::Mtce,
    Unit::Tce,
    Unit::MillionPersons,
    Unit::Persons,
    Unit::MillionHouseholds,
    Unit::Households,
    Unit::MillionSquareMetres,
    Unit::SquareMetres,
    Unit::Currency,
    Unit::CurrencyPerSquareMetre,
    Unit::Dimensionless,
    Unit::KgCo2PerHousehold,
    Unit::MtCo2PerMillionHouseholds,
    Unit::KgCo2PerPerson,
    Unit::MtCo2PerMillionPersons,
    Unit::KgCo2PerSquareMetre,
    Unit::MtCo2PerMillionSquareMetres,
    Unit::TCo2PerTce,
    Unit::KgCo2PerTce,
    Unit::TcePerSquareMetre,
    Unit::Derived,
];

impl Unit {
    pub fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            MtCo2 | KtCo2 | TCo2 | KgCo2 => Dimension::Mass,
            Mtce | Tce => Dimension::Energy,
            MillionPersons | Persons => Dimension::Persons,
            MillionHouseholds | Households => Dimension::Households,
            MillionSquareMetres | SquareMetres => Dimension::Area,
            Currency => Dimension::Currency,
            CurrencyPerSquareMetre => Dimension::CurrencyPerArea,
            Dimensionless => Dimension::Dimensionless,
            KgCo2PerHousehold | MtCo2PerMillionHouseholds => Dimension::MassPerHousehold,
            KgCo2PerPerson | MtCo2PerMillionPersons => Dimension::MassPerPerson,
            KgCo2PerSquareMetre | MtCo2PerMillionSquareMetres => Dimension::MassPerArea,
            TCo2PerTce | KgCo2PerTce => Dimension::MassPerEnergy,
            TcePerSquareMetre => Dimension::EnergyPerArea,
            Derived => Dimension::Derived,
        }
    }

    /// Decimal exponent of this unit relative to its dimension's reference.
    fn exponent(self) -> i32 {
        use Unit::*;
        match self {
            KgCo2 => 0,
            TCo2 => 3,
            KtCo2 => 6,
            MtCo2 => 9,
            Tce => 0,
            Mtce => 6,
            Persons | Households | SquareMetres => 0,
            MillionPersons | MillionHouseholds | MillionSquareMetres => 6,
            Currency | CurrencyPerSquareMetre | Dimensionless | Derived => 0,
            KgCo2PerHousehold | KgCo2PerPerson | KgCo2PerSquareMetre => 0,
            MtCo2PerMillionHouseholds | MtCo2PerMillionPersons | MtCo2PerMillionSquareMetres => 3,
            KgCo2PerTce => 0,
            TCo2PerTce => 3,
            TcePerSquareMetre => 0,
        }
    }

    /// Canonical storage unit for this unit's dimension.
    pub fn canonical(self) -> Unit {
        use Unit::*;
        match self.dimension() {
            Dimension::Mass => MtCo2,
            Dimension::Energy => Mtce,
            Dimension::Persons => MillionPersons,
            Dimension::Households => MillionHouseholds,
            Dimension::Area => MillionSquareMetres,
            Dimension::Currency => Currency,
            Dimension::CurrencyPerArea => CurrencyPerSquareMetre,
            Dimension::Dimensionless => Dimensionless,
            Dimension::MassPerHousehold => KgCo2PerHousehold,
            Dimension::MassPerPerson => KgCo2PerPerson,
            Dimension::MassPerArea => KgCo2PerSquareMetre,
            Dimension::MassPerEnergy => TCo2PerTce,
            Dimension::EnergyPerArea => TcePerSquareMetre,
            Dimension::Derived => Derived,
        }
    }

    pub fn tag(self) -> &'static str {
        use Unit::*;
        match self {
            MtCo2 => "MtCO2",
            KtCo2 => "ktCO2",
            TCo2 => "tCO2",
            KgCo2 => "kgCO2",
            Mtce => "Mtce",
            Tce => "tce",
            MillionPersons => "million-persons",
            Persons => "persons",
            MillionHouseholds => "million-households",
            Households => "households",
            MillionSquareMetres => "million-m2",
            SquareMetres => "m2",
            Currency => "currency",
            CurrencyPerSquareMetre => "currency-per-m2",
            Dimensionless => "dimensionless",
            KgCo2PerHousehold => "kgCO2/household",
            MtCo2PerMillionHouseholds => "MtCO2/million-households",
            KgCo2PerPerson => "kgCO2/person",
            MtCo2PerMillionPersons => "MtCO2/million-persons",
            KgCo2PerSquareMetre => "kgCO2/m2",
            MtCo2PerMillionSquareMetres => "MtCO2/million-m2",
            TCo2PerTce => "tCO2/tce",
            KgCo2PerTce => "kgCO2/tce",
            TcePerSquareMetre => "tce/m2",
            Derived => "derived",
        }
    }

    /// Multiplier taking a value in `self` to a value in `target`.
    pub fn factor_to(self, target: Unit) -> Result<f64> {
        check_compatible(self, target)?;
        Ok(10f64.powi(self.exponent() - target.exponent()))
    }
}

fn check_compatible(from: Unit, to: Unit) -> Result<()> {
    if from.dimension() != to.dimension() {
        return Err(Error::IncompatibleUnits { from, to });
    }
    Ok(())
}

/// Converts a raw value between two units of the same dimension.
///
/// Scales are powers of ten, so the shift is applied as a single multiply or
/// divide by an exactly representable integer power; a round trip therefore
/// costs at most two roundings.
pub fn convert_value(value: f64, from: Unit, to: Unit) -> Result<f64> {
    check_compatible(from, to)?;
    let shift = from.exponent() - to.exponent();
    Ok(match shift.cmp(&0) {
        std::cmp::Ordering::Equal => value,
        std::cmp::Ordering::Greater => value * 10f64.powi(shift),
        std::cmp::Ordering::Less => value / 10f64.powi(-shift),
    })
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_UNITS
            .iter()
            .copied()
            .find(|u| u.tag() == s)
            .ok_or_else(|| Error::UnknownUnit(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Self { value, unit }
    }

    pub fn convert(self, target: Unit) -> Result<Quantity> {
        Ok(Quantity::new(convert_value(self.value, self.unit, target)?, target))
    }
}

/// Free-function form of [`Quantity::convert`].
pub fn convert_unit(q: Quantity, target: Unit) -> Result<Quantity> {
    q.convert(target)
}
