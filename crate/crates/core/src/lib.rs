//! Household CO2 intensity decomposition toolkit.
//!
//! The pipeline runs bottom-up:
//!
//! 1. [`dataset`] loads an annual panel of base quantities (emissions,
//!    energy, households, population, floor space, income, housing price,
//!    plus optional age and carrier breakdowns) and normalises units.
//! 2. [`identity`] expresses household intensity `C/H` as an ordered product
//!    of factors and checks that the product closes on the panel.
//! 3. [`lmdi`] splits interval changes of the intensity into additive
//!    per-factor (and per-sector) effects using logarithmic-mean weights.
//! 4. [`mitigation`] sums the intensity-reducing effects into mitigation
//!    intensity and totals, with period, scale and unit post-processing.
//!
//! Interval decompositions are independent; with the default `parallel`
//! feature they run on rayon's pool, see [`exec::Execution`].

pub mod dataset;
pub mod error;
pub mod exec;
pub mod identity;
pub mod lmdi;
pub mod mitigation;
pub mod units;

pub use dataset::{
    derive_quantities, load_panel, parse_panel, renormalize_groups, validate_panel, GroupDim, LoadedPanel,
    PanelDataset, PanelSchema, ValidationReport, Year,
};
pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use identity::{
    builtin_residential_identity, check_closure, evaluate_factors, ClosureReport, FactorSpec, IdentitySpec, Term,
};
pub use lmdi::{
    attribute_group, chain_decompose, chain_decompose_with, decompose_interval, log_mean, ChainedResult, EffectTable,
    Interval, LmdiOptions, Mode,
};
pub use mitigation::{
    aggregate_periods, apply_band, assess_series, cmrbs_intensity, cmrbs_total, compare_official, fit_trend, rescale,
    to_coal_equivalent, MitigationRecord, Period, PeriodAggregate,
};
pub use units::{convert_unit, Quantity, Unit};
