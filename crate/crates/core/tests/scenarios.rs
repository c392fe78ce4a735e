use eqlab::scenarios::{
    generate, odd_even_discounted_sum, two_type_lambda, verify_constraints, ScenarioFamily, ScenarioSpec,
};
use eqlab::{DiscountStructure, Economy};
use proptest::prelude::*;

fn families() -> Vec<ScenarioFamily> {
    vec![
        ScenarioFamily::identical(),
        ScenarioFamily::sparse(),
        ScenarioFamily::dispersed(),
        ScenarioFamily::two_type(),
        ScenarioFamily::isoelastic(),
    ]
}

#[test]
fn two_type_small_case() {
    let d = DiscountStructure::new(0.5, 2).unwrap();
    assert!((odd_even_discounted_sum(&d) - 0.25).abs() < 1e-15);
    assert!((two_type_lambda(&d, 0.5) - 5.0 / 7.0).abs() < 1e-15);
}

#[test]
fn generated_economies_satisfy_their_constraints() {
    for family in families() {
        for (n, beta) in [(6, 0.8), (40, 0.95)] {
            for seed in 0..4 {
                let spec = ScenarioSpec::new(family.clone(), seed);
                let e = generate(&spec, n, beta, 8).unwrap();
                let report = verify_constraints(&e, &spec);
                assert!(report.pass, "{} N={n} seed={seed}: {:?}", family.name(), report.checks);
                for c in &report.checks {
                    assert!(c.residual <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn dispersed_deviations_balance_directly() {
    let delta = 0.4;
    let e = generate(
        &ScenarioSpec::new(ScenarioFamily::DispersedHeterogeneity { delta }, 3),
        30,
        0.9,
        7,
    )
    .unwrap();
    let d = e.discount();
    let eps: Vec<Vec<f64>> = e
        .agents()
        .iter()
        .map(|a| {
            a.kernel.taste()[1..]
                .iter()
                .map(|t| (t * d.n_beta() - 1.0) / delta)
                .collect()
        })
        .collect();
    for row in &eps {
        let s: f64 = row.iter().enumerate().map(|(k, v)| 0.9f64.powi(k as i32 + 1) * v).sum();
        assert!(s.abs() <= 1e-12 * d.n_beta());
    }
    for n in 0..30 {
        assert!(eps.iter().map(|r| r[n]).sum::<f64>().abs() <= 1e-12 * eps.len() as f64);
    }
    assert!(eps.iter().flatten().any(|v| v.abs() > 0.1));
}

#[test]
fn corrupted_shock_is_caught_and_named() {
    let spec = ScenarioSpec::new(ScenarioFamily::dispersed(), 1);
    let e = generate(&spec, 10, 0.9, 6).unwrap();
    let mut raw = e.to_spec();
    let t = &mut raw.agents[2].taste[4];
    // Flip the sign of this agent's shock on one date.
    let n_beta = e.discount().n_beta();
    *t = (2.0 - *t * n_beta) / n_beta;
    let corrupted = raw.build().unwrap();
    let report = verify_constraints(&corrupted, &spec);
    assert!(!report.pass);
    let names = report.violations();
    assert!(names.iter().any(|n| n.contains("date balance")), "{names:?}");
    assert!(names.iter().any(|n| n.contains("zero mean")), "{names:?}");
}

#[test]
fn isoelastic_requires_quadruples_and_two_type_even_halves() {
    let iso = generate(&ScenarioSpec::new(ScenarioFamily::isoelastic(), 0), 5, 0.9, 6);
    assert!(iso.unwrap_err().is_validation());
    let two = generate(&ScenarioSpec::new(ScenarioFamily::two_type(), 0), 5, 0.9, 3);
    assert!(two.unwrap_err().is_validation());
}

#[test]
fn spec_files_round_trip() {
    for family in families() {
        let e = generate(&ScenarioSpec::new(family, 2), 7, 0.85, 4).unwrap();
        let back = Economy::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(back.to_spec(), e.to_spec());
    }
}

#[test]
fn family_names_parse() {
    for family in families() {
        assert_eq!(ScenarioFamily::by_name(family.name()).unwrap().name(), family.name());
    }
    assert!(ScenarioFamily::by_name("nope").unwrap_err().is_validation());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generation_is_deterministic(seed in 0u64..1_000_000, n in 2usize..30, k in 0usize..5) {
        let family = families()[k].clone();
        let agents = 8;
        let a = generate(&ScenarioSpec::new(family.clone(), seed), n, 0.9, agents).unwrap();
        let b = generate(&ScenarioSpec::new(family, seed), n, 0.9, agents).unwrap();
        prop_assert_eq!(a.to_spec(), b.to_spec());
    }
}
