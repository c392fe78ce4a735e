//! Empirical counterparts of the uniform bounds on marginal utility, risk
//! tolerance and endowments, checked against user thresholds.
//!
//! For the isoelastic family all bounds are exact functions of the primitive
//! data: `u'_n(x)/u'_0(x) = tau_n/tau_0` for every `x`, and `r_n(x) = sigma x`.

use serde::{Deserialize, Serialize};

use crate::economy::Economy;

/// Lower/upper constants for the baseline bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditThresholds {
    pub c_u: f64,
    pub cap_u: f64,
    pub c_omega: f64,
    pub cap_omega: f64,
    pub c_w: f64,
    pub cap_w: f64,
}

impl Default for AuditThresholds {
    fn default() -> Self {
        Self {
            c_u: 0.01,
            cap_u: 100.0,
            c_omega: 0.01,
            cap_omega: 100.0,
            c_w: 0.01,
            cap_w: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditFlags {
    pub marginal_utility_bounds: bool,
    pub per_capita_endowment: bool,
    pub individual_endowment: bool,
}

impl AuditFlags {
    pub fn all(&self) -> bool {
        self.marginal_utility_bounds && self.per_capita_endowment && self.individual_endowment
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionAudit {
    pub marginal_ratio_bounds: (f64, f64),
    pub tolerance_slope_bounds: (f64, f64),
    pub per_capita_endowment_bounds: (f64, f64),
    pub discounted_endowment_ratios: Vec<f64>,
    pub endowment_sup: f64,
    pub thresholds: AuditThresholds,
    pub flags: AuditFlags,
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn audit_assumptions(e: &Economy, t: &AuditThresholds) -> AssumptionAudit {
    let d = e.discount();
    let marginal_ratio_bounds = min_max(e.agents().iter().flat_map(|a| {
        let tau = a.kernel.taste();
        tau.iter().map(move |x| x / tau[0])
    }));
    let tolerance_slope_bounds = min_max(e.agents().iter().map(|a| a.kernel.sigma()));
    let count = e.agent_count() as f64;
    let per_capita_endowment_bounds = min_max(e.aggregates().iter().map(|o| o / count));
    let discounted_endowment_ratios: Vec<f64> = e
        .agents()
        .iter()
        .map(|a| {
            a.endowment[1..]
                .iter()
                .zip(&d.powers()[1..])
                .map(|(w, b)| w * b)
                .sum::<f64>()
                / d.n_beta()
        })
        .collect();
    let endowment_sup = e
        .agents()
        .iter()
        .flat_map(|a| a.endowment.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);

    let within = |(lo, hi): (f64, f64), c: f64, cap: f64| c <= lo && hi <= cap;
    let min_ratio = discounted_endowment_ratios
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let flags = AuditFlags {
        marginal_utility_bounds: within(marginal_ratio_bounds, t.c_u, t.cap_u)
            && within(tolerance_slope_bounds, t.c_u, t.cap_u),
        per_capita_endowment: within(per_capita_endowment_bounds, t.c_omega, t.cap_omega),
        individual_endowment: min_ratio >= t.c_w && endowment_sup <= t.cap_w,
    };
    AssumptionAudit {
        marginal_ratio_bounds,
        tolerance_slope_bounds,
        per_capita_endowment_bounds,
        discounted_endowment_ratios,
        endowment_sup,
        thresholds: *t,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economy::{AgentSpec, DiscountStructure, UtilityKernel};

    fn economy(agents: Vec<(Vec<f64>, Vec<f64>)>, beta: f64) -> Economy {
        let n = agents[0].0.len() - 1;
        let d = DiscountStructure::new(beta, n).unwrap();
        let agents = agents
            .into_iter()
            .map(|(t, w)| AgentSpec::new(UtilityKernel::log(t).unwrap(), w).unwrap())
            .collect();
        Economy::new(d, agents).unwrap()
    }

    #[test]
    fn identical_agents_pass_everything() {
        let e = economy(vec![(vec![1.0; 4], vec![1.0; 4]); 3], 0.9);
        let a = audit_assumptions(
            &e,
            &AuditThresholds {
                c_u: 1.0,
                cap_u: 1.0,
                c_omega: 1.0,
                cap_omega: 1.0,
                c_w: 1.0,
                cap_w: 1.0,
            },
        );
        assert_eq!(a.marginal_ratio_bounds, (1.0, 1.0));
        assert!(a.flags.all());
    }

    #[test]
    fn date_zero_endowment_fails_individual_bound() {
        let e = economy(
            vec![(vec![1.0; 4], vec![3.0, 0.0, 0.0, 0.0]), (vec![1.0; 4], vec![1.0; 4])],
            0.9,
        );
        let t = AuditThresholds {
            c_w: 0.5,
            ..Default::default()
        };
        let a = audit_assumptions(&e, &t);
        assert_eq!(a.discounted_endowment_ratios[0], 0.0);
        assert!(!a.flags.individual_endowment);
        assert!(a.flags.per_capita_endowment);
    }

    #[test]
    fn bounds_are_ordered() {
        let e = economy(
            vec![
                (vec![1.0, 2.0, 0.5], vec![1.0, 2.0, 3.0]),
                (vec![2.0, 1.0, 4.0], vec![0.5, 0.5, 0.5]),
            ],
            0.7,
        );
        let a = audit_assumptions(&e, &AuditThresholds::default());
        assert!(a.marginal_ratio_bounds.0 <= a.marginal_ratio_bounds.1);
        assert_eq!(a.marginal_ratio_bounds, (0.5, 2.0));
        assert_eq!(a.per_capita_endowment_bounds, (0.75, 1.75));
        assert_eq!(a.endowment_sup, 3.0);
    }
}
