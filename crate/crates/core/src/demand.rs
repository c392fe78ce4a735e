//! Marshallian demand for isoelastic and log period utilities.
//!
//! With a common elasticity across dates the first-order conditions
//! `beta^n u'_n(x_n) = lambda p_n` give `x_n = lambda^(-sigma) a_n` with
//! `a_n = (beta^n tau_n / p_n)^sigma`, so the budget pins `lambda` in closed
//! form and no inner root finder is needed.

use serde::{Deserialize, Serialize};

use crate::economy::{AgentSpec, DiscountStructure, UtilityKernel};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandResult {
    /// `x_0..x_N`.
    pub consumption: Vec<f64>,
    /// Budget multiplier `lambda`.
    pub shadow_value: f64,
    /// `x_0 + sum_n p_n x_n - w`.
    pub budget_residual: f64,
    pub wealth: f64,
}

pub(crate) fn check_prices(p: &[f64], horizon: usize) -> Result<()> {
    if p.len() != horizon {
        return Err(LabError::LengthMismatch {
            expected: horizon,
            got: p.len(),
        });
    }
    for (n, v) in p.iter().enumerate() {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(LabError::NonPositivePrice {
                index: n + 1,
                value: *v,
            });
        }
    }
    Ok(())
}

fn check_kernel(k: &UtilityKernel, d: &DiscountStructure) -> Result<()> {
    if k.horizon() != d.horizon() {
        return Err(LabError::LengthMismatch {
            expected: d.horizon() + 1,
            got: k.taste().len(),
        });
    }
    Ok(())
}

/// Demand of one agent at future prices `p` and total wealth `w`.
pub fn agent_demand(k: &UtilityKernel, d: &DiscountStructure, p: &[f64], w: f64) -> Result<DemandResult> {
    check_kernel(k, d)?;
    check_prices(p, d.horizon())?;
    if !(w > 0.0 && w.is_finite()) {
        return Err(LabError::WealthNonPositive(w));
    }
    let tau = k.taste();
    let beta = d.powers();
    let n = d.horizon();
    let mut x = Vec::with_capacity(n + 1);
    let shadow_value = if k.is_log() {
        let total: f64 = tau.iter().zip(beta).map(|(t, b)| t * b).sum();
        x.push(tau[0] * w / total);
        for m in 1..=n {
            x.push(beta[m] * tau[m] * w / (total * p[m - 1]));
        }
        total / w
    } else {
        let s = k.sigma();
        let mut a = Vec::with_capacity(n + 1);
        a.push(tau[0].powf(s));
        for m in 1..=n {
            a.push((beta[m] * tau[m] / p[m - 1]).powf(s));
        }
        let spend = a[0] + p.iter().zip(&a[1..]).map(|(p, a)| p * a).sum::<f64>();
        let scale = w / spend;
        x.extend(a.iter().map(|a| scale * a));
        scale.powf(-1.0 / s)
    };
    let budget_residual = x[0] + p.iter().zip(&x[1..]).map(|(p, x)| p * x).sum::<f64>() - w;
    Ok(DemandResult {
        consumption: x,
        shadow_value,
        budget_residual,
        wealth: w,
    })
}

/// Demand with wealth valued from the agent's own endowment.
pub fn endowment_demand(agent: &AgentSpec, d: &DiscountStructure, p: &[f64]) -> Result<DemandResult> {
    check_prices(p, d.horizon())?;
    agent_demand(&agent.kernel, d, p, agent.wealth(p))
}

/// Solution of the future-only problem `max sum_{n>=1} beta^n u_n(z_n)` subject
/// to `sum_n p_n z_n <= w`. Returns `(z_1..z_N, lambda)`.
pub fn future_demand(k: &UtilityKernel, d: &DiscountStructure, p: &[f64], w: f64) -> Result<(Vec<f64>, f64)> {
    check_kernel(k, d)?;
    check_prices(p, d.horizon())?;
    if !(w > 0.0 && w.is_finite()) {
        return Err(LabError::WealthNonPositive(w));
    }
    let tau = &k.taste()[1..];
    let beta = &d.powers()[1..];
    if k.is_log() {
        let total: f64 = tau.iter().zip(beta).map(|(t, b)| t * b).sum();
        let z = (0..p.len()).map(|m| beta[m] * tau[m] * w / (total * p[m])).collect();
        Ok((z, total / w))
    } else {
        let s = k.sigma();
        let a: Vec<f64> = (0..p.len()).map(|m| (beta[m] * tau[m] / p[m]).powf(s)).collect();
        let spend: f64 = p.iter().zip(&a).map(|(p, a)| p * a).sum();
        let scale = w / spend;
        Ok((a.iter().map(|a| scale * a).collect(), scale.powf(-1.0 / s)))
    }
}

/// Shares `m_n = beta^n u'_n(x_n) r_n(x_n) / sum_m beta^m u'_m(x_m) r_m(x_m)`
/// over future dates for a future bundle `x_1..x_N`.
pub fn marginal_expenditure_shares(k: &UtilityKernel, d: &DiscountStructure, x_future: &[f64]) -> Result<Vec<f64>> {
    check_kernel(k, d)?;
    if x_future.len() != d.horizon() {
        return Err(LabError::LengthMismatch {
            expected: d.horizon(),
            got: x_future.len(),
        });
    }
    let mut raw = Vec::with_capacity(x_future.len());
    for (m, x) in x_future.iter().enumerate() {
        if !(*x > 0.0) {
            return Err(LabError::NonPositiveInput {
                what: "consumption",
                value: *x,
            });
        }
        let n = m + 1;
        raw.push(d.power(n) * k.marginal_utility(n, *x) * k.risk_tolerance(*x));
    }
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Wealth slopes `d xi_n / d w = r_n / (r_0 + sum_m p_m r_m)`, `n = 0..=N`.
pub fn wealth_derivative(k: &UtilityKernel, d: &DiscountStructure, p: &[f64], w: f64) -> Result<Vec<f64>> {
    let dem = agent_demand(k, d, p, w)?;
    let r: Vec<f64> = dem.consumption.iter().map(|x| k.risk_tolerance(*x)).collect();
    let r_bar = r[0] + p.iter().zip(&r[1..]).map(|(p, r)| p * r).sum::<f64>();
    Ok(r.into_iter().map(|r| r / r_bar).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(beta: f64, n: usize) -> DiscountStructure {
        DiscountStructure::new(beta, n).unwrap()
    }

    #[test]
    fn autarky_at_discount_prices() {
        let d = disc(0.9, 6);
        for k in [
            UtilityKernel::log(vec![1.0; 7]).unwrap(),
            UtilityKernel::isoelastic(0.3, vec![1.0; 7]).unwrap(),
            UtilityKernel::isoelastic(2.5, vec![1.0; 7]).unwrap(),
        ] {
            let omega = [1.7; 7];
            let p = d.discount_prices();
            let w = omega[0] + p.iter().map(|p| p * 1.7).sum::<f64>();
            let dem = agent_demand(&k, &d, &p, w).unwrap();
            for x in &dem.consumption {
                assert!((x - 1.7).abs() < 1e-12 * 1.7, "{x}");
            }
        }
    }

    #[test]
    fn log_demand_matches_cobb_douglas_shares() {
        let d = disc(0.85, 4);
        let tau = vec![1.3, 0.7, 2.0, 1.1, 0.4];
        let k = UtilityKernel::log(tau.clone()).unwrap();
        let p = vec![0.8, 0.9, 0.5, 0.3];
        let w = 7.5;
        let dem = agent_demand(&k, &d, &p, w).unwrap();
        let total: f64 = (0..5).map(|n| d.power(n) * tau[n]).sum();
        assert!((dem.consumption[0] * total - tau[0] * w).abs() <= 1e-10 * w);
        for n in 1..5 {
            let lhs = p[n - 1] * dem.consumption[n] * total;
            let rhs = d.power(n) * tau[n] * w;
            assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        }
    }

    #[test]
    fn first_order_conditions_and_budget() {
        let d = disc(0.8, 5);
        let k = UtilityKernel::isoelastic(0.2, vec![1.0, 1.5, 0.6, 1.2, 0.9, 2.0]).unwrap();
        let p = vec![0.9, 0.5, 0.7, 0.2, 0.4];
        let dem = agent_demand(&k, &d, &p, 4.0).unwrap();
        let lam = dem.shadow_value;
        assert!((k.marginal_utility(0, dem.consumption[0]) - lam).abs() <= 1e-10 * lam);
        for n in 1..=5 {
            let lhs = d.power(n) * k.marginal_utility(n, dem.consumption[n]);
            assert!((lhs - lam * p[n - 1]).abs() <= 1e-10 * lam * p[n - 1]);
        }
        assert!(dem.budget_residual.abs() <= 1e-10 * 4.0);
    }

    #[test]
    fn error_paths() {
        let d = disc(0.8, 2);
        let k = UtilityKernel::log(vec![1.0; 3]).unwrap();
        assert!(matches!(
            agent_demand(&k, &d, &[0.5, 0.0], 1.0),
            Err(LabError::NonPositivePrice { index: 2, .. })
        ));
        assert!(matches!(
            agent_demand(&k, &d, &[0.5, 0.2], -1.0),
            Err(LabError::WealthNonPositive(_))
        ));
        assert!(matches!(
            agent_demand(&k, &d, &[0.5], 1.0),
            Err(LabError::LengthMismatch { .. })
        ));
        assert!(marginal_expenditure_shares(&k, &d, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn log_shares_are_taste_weights() {
        let d = disc(0.9, 3);
        let tau = vec![1.0, 2.0, 0.5, 1.5];
        let k = UtilityKernel::log(tau.clone()).unwrap();
        let m = marginal_expenditure_shares(&k, &d, &[0.3, 4.0, 1.1]).unwrap();
        let total: f64 = (1..4).map(|n| d.power(n) * tau[n]).sum();
        for n in 1..4 {
            assert!((m[n - 1] - d.power(n) * tau[n] / total).abs() < 1e-15);
        }
        let s: f64 = m.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_tastes_give_discount_weights() {
        let d = disc(0.7, 5);
        let k = UtilityKernel::isoelastic(0.4, vec![1.0; 6]).unwrap();
        let m = marginal_expenditure_shares(&k, &d, &[2.0; 5]).unwrap();
        for (a, b) in m.iter().zip(d.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn wealth_slopes_exhaust_budget() {
        let d = disc(0.75, 4);
        let k = UtilityKernel::isoelastic(1.7, vec![0.5, 1.0, 2.0, 1.0, 0.8]).unwrap();
        let p = vec![0.7, 0.6, 0.3, 0.35];
        let dw = wealth_derivative(&k, &d, &p, 3.0).unwrap();
        let total = dw[0] + p.iter().zip(&dw[1..]).map(|(p, v)| p * v).sum::<f64>();
        assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn log_wealth_slopes_closed_form() {
        let d = disc(0.75, 4);
        let tau = vec![0.5, 1.0, 2.0, 1.0, 0.8];
        let k = UtilityKernel::log(tau.clone()).unwrap();
        let p = vec![0.7, 0.6, 0.3, 0.35];
        let dw = wealth_derivative(&k, &d, &p, 3.0).unwrap();
        let total: f64 = (0..5).map(|n| d.power(n) * tau[n]).sum();
        assert!((dw[0] - tau[0] / total).abs() <= 1e-12);
        for n in 1..5 {
            let expect = d.power(n) * tau[n] / (total * p[n - 1]);
            assert!((dw[n] - expect).abs() <= 1e-12 * expect);
        }
    }
}
