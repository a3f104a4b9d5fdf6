#![allow(dead_code)]

use std::path::PathBuf;

use kaya_lmdi::dataset::{GroupDim, PanelDataset, PanelSchema, DEFAULT_AGE_GROUPS, DEFAULT_CARRIERS};
use kaya_lmdi::identity::{FactorSpec, IdentitySpec, TargetSpec, Term};
use kaya_lmdi::units::Unit;
use proptest::prelude::*;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn fixture_panel() -> PanelDataset {
    kaya_lmdi::load_panel(&data_dir().join("fixture_panel.csv"), &PanelSchema::default())
        .expect("fixture loads")
        .panel
}

pub fn expected() -> serde_json::Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/oracle/expected.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// `c_h = C/H` with unit scale and plain factors over the given symbols.
pub fn custom_identity(factors: Vec<FactorSpec>) -> IdentitySpec {
    IdentitySpec::new(
        "toy",
        TargetSpec {
            name: "c_h".into(),
            unit: Unit::KgCo2PerHousehold,
            scale: 1.0,
            terms: vec![Term::new("C", 1), Term::new("H", -1)],
        },
        factors,
    )
    .unwrap()
}

/// Two-factor toy `c_h = x * y` with x: 2 -> 3, y: 5 -> 4 and 100 million
/// households (C carries the household scale so that C/H = x*y).
pub fn two_factor_toy() -> (IdentitySpec, PanelDataset) {
    let panel = PanelDataset::new(2000, 2)
        .unwrap()
        .with_series("x", Unit::Dimensionless, vec![2.0, 3.0])
        .unwrap()
        .with_series("y", Unit::Dimensionless, vec![5.0, 4.0])
        .unwrap()
        .with_series("C", Unit::MtCo2, vec![1000.0, 1200.0])
        .unwrap()
        .with_series("H", Unit::MillionHouseholds, vec![100.0, 100.0])
        .unwrap();
    let spec = custom_identity(vec![
        FactorSpec::new("x", vec![Term::new("x", 1)]),
        FactorSpec::new("y", vec![Term::new("y", 1)]),
    ]);
    (spec, panel)
}

/// Carrier toy `c_h = x * sum_l K_l`, x constant 2, K_1: 1 -> 2, K_2: 3 -> 2.
pub fn carrier_toy() -> (IdentitySpec, PanelDataset) {
    let panel = PanelDataset::new(2000, 2)
        .unwrap()
        .with_series("x", Unit::Dimensionless, vec![2.0, 2.0])
        .unwrap()
        .with_series("C", Unit::MtCo2, vec![8.0, 8.0])
        .unwrap()
        .with_series("H", Unit::MillionHouseholds, vec![1.0, 1.0])
        .unwrap()
        .with_group_series(
            GroupDim::Carrier,
            "K",
            Unit::TCo2PerTce,
            vec![("one".into(), vec![1.0, 2.0]), ("two".into(), vec![3.0, 2.0])],
        )
        .unwrap();
    let spec = custom_identity(vec![
        FactorSpec::new("x", vec![Term::new("x", 1)]),
        FactorSpec::grouped("K", GroupDim::Carrier, vec![Term::member("K", 1)]),
    ]);
    (spec, panel)
}

/// Log-uniform value in `[1e-3, 1e3]`.
pub fn log_uniform() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))
}

/// Random consistent residential panel: every base quantity and group member
/// drawn log-uniform, totals formed as member sums.
pub fn random_panel(max_years: usize) -> impl Strategy<Value = PanelDataset> {
    (2..=max_years).prop_flat_map(|years| {
        let per_year = 5 + DEFAULT_AGE_GROUPS.len() + 2 * DEFAULT_CARRIERS.len();
        prop::collection::vec(log_uniform(), years * per_year).prop_map(move |v| build_random_panel(years, &v))
    })
}

fn build_random_panel(years: usize, v: &[f64]) -> PanelDataset {
    let per_year = v.len() / years;
    let row = |k: usize| &v[k * per_year..(k + 1) * per_year];
    let col = |i: usize| (0..years).map(|k| row(k)[i]).collect::<Vec<f64>>();
    let na = DEFAULT_AGE_GROUPS.len();
    let nc = DEFAULT_CARRIERS.len();
    let ages: Vec<Vec<f64>> = (0..na).map(|j| col(5 + j)).collect();
    let energy: Vec<Vec<f64>> = (0..nc).map(|l| col(5 + na + l)).collect();
    let emissions: Vec<Vec<f64>> = (0..nc).map(|l| col(5 + na + nc + l)).collect();
    let sum = |members: &[Vec<f64>]| {
        (0..years)
            .map(|k| members.iter().map(|m| m[k]).sum())
            .collect::<Vec<f64>>()
    };
    let labelled =
        |labels: &[&str], members: Vec<Vec<f64>>| labels.iter().map(|l| l.to_string()).zip(members).collect::<Vec<_>>();
    PanelDataset::new(2000, years)
        .unwrap()
        .with_series("C", Unit::MtCo2, sum(&emissions))
        .unwrap()
        .with_series("E", Unit::Mtce, sum(&energy))
        .unwrap()
        .with_series("H", Unit::MillionHouseholds, col(0))
        .unwrap()
        .with_series("P", Unit::MillionPersons, sum(&ages))
        .unwrap()
        .with_series("F", Unit::MillionSquareMetres, col(1))
        .unwrap()
        .with_series("I", Unit::Currency, col(2))
        .unwrap()
        .with_series("Pr", Unit::CurrencyPerSquareMetre, col(3))
        .unwrap()
        .with_group_series(
            GroupDim::Age,
            "P",
            Unit::MillionPersons,
            labelled(&DEFAULT_AGE_GROUPS, ages),
        )
        .unwrap()
        .with_group_series(GroupDim::Carrier, "E", Unit::Mtce, labelled(&DEFAULT_CARRIERS, energy))
        .unwrap()
        .with_group_series(
            GroupDim::Carrier,
            "C",
            Unit::MtCo2,
            labelled(&DEFAULT_CARRIERS, emissions),
        )
        .unwrap()
}

pub fn rel_close(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * expected.abs().max(1.0)
}
