#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use kaya_lmdi::dataset::{GroupDim, PanelDataset, DEFAULT_AGE_GROUPS, DEFAULT_CARRIERS};
use kaya_lmdi::identity::{FactorSpec, IdentitySpec, TargetSpec, Term};
use kaya_lmdi::units::Unit;
use rand::rngs::StdRng;
use rand::RngExt;

pub const BIN: &str = env!("CARGO_BIN_EXE_kaya-lmdi");

pub fn core_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core")
}

pub fn fixture_path() -> PathBuf {
    core_dir().join("tests/data/fixture_panel.csv")
}

pub fn expected() -> serde_json::Value {
    let text = fs::read_to_string(core_dir().join("tests/oracle/expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn fixture_panel() -> PanelDataset {
    kaya_lmdi::load_panel(&fixture_path(), &Default::default())
        .unwrap()
        .panel
}

/// Runs the binary and returns its exit code.
pub fn run(args: &[&str]) -> i32 {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    out.status.code().expect("exit code")
}

pub fn run_output(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

/// Every file under `dir` keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if path.is_dir() {
            for (k, v) in read_tree(&path) {
                out.insert(format!("{name}/{k}"), v);
            }
        } else {
            out.insert(name, fs::read(&path).unwrap());
        }
    }
    out
}

pub fn write_periods(path: &Path, periods: &[(&str, i32, i32)]) {
    let text: String = periods
        .iter()
        .map(|(l, s, e)| format!("[[period]]\nlabel = {l:?}\nstart = {s}\nend = {e}\n\n"))
        .collect();
    fs::write(path, text).unwrap();
}

/// Replaces the value of `column` in the row for `year` of a panel CSV.
pub fn edit_cell(csv: &str, year: i32, column: &str, value: &str) -> String {
    let mut lines: Vec<String> = csv.lines().map(str::to_string).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| *h == column).expect("column");
    for line in lines.iter_mut().skip(1) {
        let mut cells: Vec<String> = line.split(',').map(str::to_string).collect();
        if cells[0] == year.to_string() {
            cells[col] = value.to_string();
            *line = cells.join(",");
        }
    }
    lines.join("\n") + "\n"
}

pub fn cell(csv: &str, year: i32, column: &str) -> f64 {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == column).expect("column");
    let row = lines.find(|l| l.starts_with(&format!("{year},"))).expect("year row");
    row.split(',').nth(col).unwrap().parse().unwrap()
}

pub fn drop_column(csv: &str, column: &str) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let col = rows[0].iter().position(|h| *h == column).expect("column");
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            r.remove(col);
            r.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

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

/// `c_h = x * y`, x: 2 -> 3, y: 5 -> 4, 100 million households.
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

/// `c_h = x * sum_l K_l`, x constant 2, K_1: 1 -> 2, K_2: 3 -> 2.
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

/// Log-uniform draw in `[1e-3, 1e3]`.
pub fn log_uniform(rng: &mut StdRng) -> f64 {
    10f64.powf(rng.random_range(-3.0..3.0))
}

/// Residential panel with every base quantity and group member drawn
/// log-uniform and totals formed as member sums.
pub fn random_panel(rng: &mut StdRng, years: usize) -> PanelDataset {
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| log_uniform(rng)).collect() };
    let ages: Vec<Vec<f64>> = DEFAULT_AGE_GROUPS.iter().map(|_| draw(years)).collect();
    let energy: Vec<Vec<f64>> = DEFAULT_CARRIERS.iter().map(|_| draw(years)).collect();
    let emissions: Vec<Vec<f64>> = DEFAULT_CARRIERS.iter().map(|_| draw(years)).collect();
    let sum = |m: &[Vec<f64>]| (0..years).map(|k| m.iter().map(|s| s[k]).sum()).collect::<Vec<f64>>();
    let labelled = |labels: &[&str], m: &[Vec<f64>]| {
        labels
            .iter()
            .map(|l| l.to_string())
            .zip(m.iter().cloned())
            .collect::<Vec<_>>()
    };
    PanelDataset::new(2000, years)
        .unwrap()
        .with_series("C", Unit::MtCo2, sum(&emissions))
        .unwrap()
        .with_series("E", Unit::Mtce, sum(&energy))
        .unwrap()
        .with_series("H", Unit::MillionHouseholds, draw(years))
        .unwrap()
        .with_series("P", Unit::MillionPersons, sum(&ages))
        .unwrap()
        .with_series("F", Unit::MillionSquareMetres, draw(years))
        .unwrap()
        .with_series("I", Unit::Currency, draw(years))
        .unwrap()
        .with_series("Pr", Unit::CurrencyPerSquareMetre, draw(years))
        .unwrap()
        .with_group_series(
            GroupDim::Age,
            "P",
            Unit::MillionPersons,
            labelled(&DEFAULT_AGE_GROUPS, &ages),
        )
        .unwrap()
        .with_group_series(GroupDim::Carrier, "E", Unit::Mtce, labelled(&DEFAULT_CARRIERS, &energy))
        .unwrap()
        .with_group_series(
            GroupDim::Carrier,
            "C",
            Unit::MtCo2,
            labelled(&DEFAULT_CARRIERS, &emissions),
        )
        .unwrap()
}
