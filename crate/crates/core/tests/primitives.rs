use eqlab::demand::{agent_demand, future_demand, marginal_expenditure_shares, wealth_derivative};
use eqlab::economy::{beta_inner_product, effective_commodity_count, risk_tolerance};
use eqlab::{DiscountStructure, UtilityKernel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn inner_product_matches_straight_loop() {
    let d = DiscountStructure::new(0.8, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let x: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut num = 0.0;
        let mut den = 0.0;
        let mut b = 1.0;
        for n in 0..7 {
            b *= 0.8;
            num += b * x[n] * y[n];
            den += b;
        }
        let got = beta_inner_product(&x, &y, &d).unwrap();
        assert!(
            (got - num / den).abs() <= 1e-14 * (1.0 + got.abs()),
            "{got} vs {}",
            num / den
        );
    }
}

#[test]
fn isoelastic_risk_tolerance_is_linear() {
    let k = UtilityKernel::isoelastic(0.5, vec![1.0, 1.0]).unwrap();
    assert!((risk_tolerance(&k, 1, 3.0).unwrap() - 1.5).abs() < 1e-15);
    let log = UtilityKernel::log(vec![1.0, 2.0]).unwrap();
    assert_eq!(risk_tolerance(&log, 1, 2.5).unwrap(), 2.5);
}

#[test]
fn risk_tolerance_matches_finite_differences() {
    for sigma in [0.2, 0.7, 1.0, 1.8, 3.0] {
        let k = if sigma == 1.0 {
            UtilityKernel::log(vec![1.0, 1.3]).unwrap()
        } else {
            UtilityKernel::isoelastic(sigma, vec![1.0, 1.3]).unwrap()
        };
        for x in [0.3, 1.0, 4.0] {
            let h = 1e-6 * x;
            let u2 = (k.marginal_utility(1, x + h) - k.marginal_utility(1, x - h)) / (2.0 * h);
            let oracle = -k.marginal_utility(1, x) / u2;
            assert!(
                rel(risk_tolerance(&k, 1, x).unwrap(), oracle) < 1e-5,
                "sigma={sigma} x={x}"
            );
        }
    }
}

fn random_kernel(rng: &mut ChaCha8Rng, n: usize) -> UtilityKernel {
    let taste: Vec<f64> = (0..=n).map(|_| rng.random_range(0.5..1.5)).collect();
    if rng.random_bool(0.3) {
        UtilityKernel::log(taste).unwrap()
    } else {
        UtilityKernel::isoelastic(rng.random_range(0.3..2.5), taste).unwrap()
    }
}

#[test]
fn wealth_derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(157);
    for _ in 0..10 {
        let n = rng.random_range(2..8);
        let d = DiscountStructure::new(rng.random_range(0.7..0.95), n).unwrap();
        let k = random_kernel(&mut rng, n);
        let p: Vec<f64> = d
            .discount_prices()
            .iter()
            .map(|b| b * rng.random_range(0.6..1.6))
            .collect();
        let w = rng.random_range(1.0..5.0);
        let analytic = wealth_derivative(&k, &d, &p, w).unwrap();
        let h = 1e-6 * w;
        let up = agent_demand(&k, &d, &p, w + h).unwrap().consumption;
        let down = agent_demand(&k, &d, &p, w - h).unwrap().consumption;
        for m in 0..=n {
            let fd = (up[m] - down[m]) / (2.0 * h);
            assert!(rel(analytic[m], fd) < 1e-4, "date {m}: {} vs {fd}", analytic[m]);
        }
    }
}

#[test]
fn log_demand_spends_taste_weighted_shares() {
    let d = DiscountStructure::new(0.9, 4).unwrap();
    let tau = vec![1.0, 0.4, 2.0, 1.1, 0.7];
    let k = UtilityKernel::log(tau.clone()).unwrap();
    let p = [0.95, 0.7, 0.8, 0.5];
    let w = 3.3;
    let dem = agent_demand(&k, &d, &p, w).unwrap();
    let total: f64 = (0..=4).map(|n| d.power(n) * tau[n]).sum();
    assert!((dem.consumption[0] * total - w).abs() < 1e-10);
    for n in 1..=4 {
        let lhs = p[n - 1] * dem.consumption[n] * total;
        assert!((lhs - d.power(n) * tau[n] * w).abs() < 1e-10);
    }
    let shares = marginal_expenditure_shares(&k, &d, &dem.consumption[1..]).unwrap();
    let future: f64 = (1..=4).map(|n| d.power(n) * tau[n]).sum();
    for n in 1..=4 {
        assert!(rel(shares[n - 1], d.power(n) * tau[n] / future) < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_one(beta in 0.05f64..0.999, n in 1usize..400) {
        let d = DiscountStructure::new(beta, n).unwrap();
        let s: f64 = d.weights().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(rel(effective_commodity_count(&d), beta * (1.0 - beta.powi(n as i32)) / (1.0 - beta)) < 1e-12);
    }

    #[test]
    fn inner_product_is_symmetric_and_bilinear(
        beta in 0.1f64..0.99,
        xs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..30),
        a in -3.0f64..3.0,
    ) {
        let n = xs.len();
        let d = DiscountStructure::new(beta, n).unwrap();
        let x: Vec<f64> = xs.iter().map(|t| t.0).collect();
        let y: Vec<f64> = xs.iter().map(|t| t.1).collect();
        let z: Vec<f64> = xs.iter().map(|t| t.2).collect();
        let ip = |u: &[f64], v: &[f64]| beta_inner_product(u, v, &d).unwrap();
        prop_assert!((ip(&x, &y) - ip(&y, &x)).abs() < 1e-12);
        let combo: Vec<f64> = x.iter().zip(&z).map(|(x, z)| a * x + z).collect();
        let lin = a * ip(&x, &y) + ip(&z, &y);
        prop_assert!((ip(&combo, &y) - lin).abs() < 1e-10 * (1.0 + lin.abs()));
        prop_assert!(ip(&x, &x) >= 0.0);
    }

    #[test]
    fn demand_exhausts_budget_and_scales_with_prices(
        seed in 0u64..1000,
        scale in 0.2f64..5.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..10);
        let d = DiscountStructure::new(rng.random_range(0.6..0.97), n).unwrap();
        let k = random_kernel(&mut rng, n);
        let p: Vec<f64> = d.discount_prices().iter().map(|b| b * rng.random_range(0.5..2.0)).collect();
        let w = rng.random_range(0.5..5.0);
        let dem = agent_demand(&k, &d, &p, w).unwrap();
        prop_assert!(dem.budget_residual.abs() <= 1e-10 * w);

        // Future demand is homogeneous of degree zero in (p, w).
        let (x, _) = future_demand(&k, &d, &p, w).unwrap();
        let ps: Vec<f64> = p.iter().map(|v| v * scale).collect();
        let (xs, _) = future_demand(&k, &d, &ps, w * scale).unwrap();
        for (a, b) in x.iter().zip(&xs) {
            prop_assert!(rel(*b, *a) < 1e-10);
        }
    }
}
