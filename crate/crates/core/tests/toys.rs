mod common;

use approx::assert_relative_eq;
use kaya_lmdi::dataset::{validate_panel, GroupDim, PanelDataset, Severity};
use kaya_lmdi::identity::{check_closure, FactorSpec, Term};
use kaya_lmdi::lmdi::{chain_decompose, decompose_interval, Interval, LmdiOptions, LogMeanVariant, Mode, ZeroPolicy};
use kaya_lmdi::mitigation::{cmrbs_intensity, cmrbs_total, HouseholdConvention, SignScope};
use kaya_lmdi::units::Unit;
use kaya_lmdi::Error;

use common::*;

fn aggregate() -> LmdiOptions {
    LmdiOptions::default().with_mode(Mode::Aggregate)
}

#[test]
fn two_factor_interval() {
    let (spec, panel) = two_factor_toy();
    let t = decompose_interval(&spec, &panel, Interval::new(2000, 2001).unwrap(), &aggregate()).unwrap();
    assert_eq!(t.delta_total, 2.0);
    // L(12, 10) = 2 / ln 1.2; effects are L * ln 1.5 and L * ln 0.8.
    let l = 2.0 / 1.2f64.ln();
    assert_relative_eq!(t.effect("x").unwrap(), l * 1.5f64.ln(), max_relative = 1e-14);
    assert_relative_eq!(t.effect("y").unwrap(), l * 0.8f64.ln(), max_relative = 1e-14);
    // 50-digit reference: +4.447802171483089, -2.447802171483089.
    assert_relative_eq!(t.effect("x").unwrap(), 4.447802171483089, max_relative = 1e-14);
    assert_relative_eq!(t.effect("y").unwrap(), -2.447802171483089, max_relative = 1e-14);
    assert_relative_eq!(t.effects_sum(), 2.0, max_relative = 1e-12);

    let intensity = cmrbs_intensity(&t, SignScope::Factor);
    assert_relative_eq!(intensity, -l * 0.8f64.ln(), max_relative = 1e-14);
    let total = cmrbs_total(intensity, &panel, t.interval, HouseholdConvention::End).unwrap();
    assert_relative_eq!(total, intensity / 10.0, max_relative = 1e-14);
    assert!((total - 0.244778).abs() / 0.244778 < 1e-5);
}

#[test]
fn sectoral_without_groups_matches_aggregate() {
    let (spec, panel) = two_factor_toy();
    let iv = Interval::new(2000, 2001).unwrap();
    let a = decompose_interval(&spec, &panel, iv, &aggregate()).unwrap();
    let s = decompose_interval(&spec, &panel, iv, &LmdiOptions::default()).unwrap();
    for (x, y) in a.effects.iter().zip(&s.effects) {
        assert_relative_eq!(x, y, max_relative = 1e-14);
    }
    assert_eq!(s.sectors.as_ref().unwrap().sectors.len(), 1);
}

#[test]
fn carrier_zero_net() {
    let (spec, panel) = carrier_toy();
    let t = decompose_interval(
        &spec,
        &panel,
        Interval::new(2000, 2001).unwrap(),
        &LmdiOptions::default(),
    )
    .unwrap();
    assert_eq!(t.delta_total, 0.0);
    assert_eq!(t.effect("x").unwrap(), 0.0);
    assert!(t.effect("K").unwrap().abs() <= 1e-12);
    let cells = &t.sector_effects.as_ref().unwrap()[1];
    assert!((cells[0] - 2.0).abs() <= 1e-9);
    assert!((cells[1] + 2.0).abs() <= 1e-9);
    assert!(cmrbs_intensity(&t, SignScope::Factor) <= 1e-12);
    assert!((cmrbs_intensity(&t, SignScope::Sector) - 2.0).abs() <= 1e-9);
    let marg = t.member_marginals(1, GroupDim::Carrier).unwrap();
    assert_eq!(marg[0].0, "one");
    assert_eq!(marg[0].1, cells[0]);
}

#[test]
fn unchanged_panel_has_zero_effects() {
    let panel = fixture_panel();
    let first = panel.first_year();
    let mut frozen = PanelDataset::new(first, 2).unwrap();
    for s in panel.all_series() {
        frozen = frozen.with_series(&s.name, s.unit, vec![s.values[0]; 2]).unwrap();
    }
    for (dim, g) in panel.groups() {
        for (base, series) in &g.series {
            let members = g
                .members
                .iter()
                .zip(series)
                .map(|(l, s)| (l.clone(), vec![s.values[0]; 2]))
                .collect();
            frozen = frozen.with_group_series(dim, base, series[0].unit, members).unwrap();
        }
    }
    let spec = kaya_lmdi::builtin_residential_identity();
    for opts in [aggregate(), LmdiOptions::default()] {
        let t = decompose_interval(&spec, &frozen, Interval::new(first, first + 1).unwrap(), &opts).unwrap();
        assert!(t.effects.iter().all(|e| *e == 0.0), "{:?}", t.effects);
        assert_eq!(cmrbs_intensity(&t, SignScope::Sector), 0.0);
    }
}

#[test]
fn single_step_chain_equals_interval() {
    let (spec, panel) = two_factor_toy();
    let iv = Interval::new(2000, 2001).unwrap();
    let chained = chain_decompose(&spec, &panel, iv, &aggregate()).unwrap();
    assert_eq!(chained.steps.len(), 1);
    assert_eq!(
        chained.steps[0],
        decompose_interval(&spec, &panel, iv, &aggregate()).unwrap()
    );
}

#[test]
fn interval_outside_panel() {
    let (spec, panel) = two_factor_toy();
    let err = decompose_interval(&spec, &panel, Interval::new(2000, 2005).unwrap(), &aggregate());
    assert!(matches!(err, Err(Error::YearOutOfRange(2005))));
}

#[test]
fn closure_failure_is_reported() {
    let (mut spec, panel) = two_factor_toy();
    spec.factors[1].terms[0].exponent = 2;
    let report = check_closure(&spec, &panel, 1e-9).unwrap();
    assert!(!report.passed());
    let err = decompose_interval(&spec, &panel, Interval::new(2000, 2001).unwrap(), &aggregate()).unwrap_err();
    assert!(matches!(err, Error::ClosureFailure { year: 2000, .. }), "{err}");
}

#[test]
fn zero_policy() {
    // Second carrier starts at zero.
    let panel = PanelDataset::new(2000, 2)
        .unwrap()
        .with_series("x", Unit::Dimensionless, vec![2.0, 2.0])
        .unwrap()
        .with_series("C", Unit::MtCo2, vec![2.0, 8.0])
        .unwrap()
        .with_series("H", Unit::MillionHouseholds, vec![1.0, 1.0])
        .unwrap()
        .with_group_series(
            GroupDim::Carrier,
            "K",
            Unit::TCo2PerTce,
            vec![("one".into(), vec![1.0, 2.0]), ("two".into(), vec![0.0, 2.0])],
        )
        .unwrap();
    let spec = custom_identity(vec![
        FactorSpec::new("x", vec![Term::new("x", 1)]),
        FactorSpec::grouped("K", GroupDim::Carrier, vec![Term::member("K", 1)]),
    ]);
    let iv = Interval::new(2000, 2001).unwrap();
    let reject = LmdiOptions {
        zero_policy: ZeroPolicy::Reject,
        ..LmdiOptions::default()
    };
    assert!(matches!(
        decompose_interval(&spec, &panel, iv, &reject),
        Err(Error::NonPositiveFactor { .. })
    ));
    let t = decompose_interval(&spec, &panel, iv, &LmdiOptions::default()).unwrap();
    assert!(t.effects.iter().all(|e| e.is_finite()));
    assert!((t.effects_sum() - t.delta_total).abs() <= 1e-9 * t.delta_total.abs());
}

#[test]
fn zero_on_tie_variant() {
    let (spec, panel) = carrier_toy();
    let iv = Interval::new(2000, 2001).unwrap();
    let opts = LmdiOptions {
        log_mean: LogMeanVariant::ZeroOnTie,
        ..aggregate()
    };
    // Aggregate c_h unchanged: the zero-on-tie weight zeroes every effect.
    let t = decompose_interval(&spec, &panel, iv, &opts).unwrap();
    assert!(t.effects.iter().all(|e| *e == 0.0));
}

#[test]
fn carrier_sum_violation() {
    let panel = fixture_panel();
    let e = panel.series("E").unwrap();
    let scaled: Vec<f64> = e.values.iter().map(|v| v / 1.02).collect();
    let perturbed = panel.clone().with_series("E", e.unit, scaled).unwrap();
    let report = validate_panel(&perturbed);
    assert!(!report.passed());
    let f = &report.findings[0];
    assert_eq!(f.severity, Severity::Error);
    assert_eq!(f.message, "carrier energy sum residual 2.0e-2");
    assert_eq!(report.findings.len(), panel.len());
}

#[test]
fn fixture_validates_clean() {
    let report = validate_panel(&fixture_panel());
    assert!(report.passed());
    assert!(report.findings.is_empty(), "{:?}", report.findings);
}
