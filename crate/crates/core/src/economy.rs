//! Truncated dated-commodity exchange economies.
//!
//! Dates run `0..=N`; date 0 is the numeraire and prices are only carried for
//! the future dates `1..=N`. Every agent discounts at the common factor
//! `beta` and has additively separable isoelastic (or log) period utility
//! `u_n(x) = tau_n * x^(1 - 1/sigma) / (1 - 1/sigma)`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Common discount factor and truncation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountStructure {
    beta: f64,
    horizon: usize,
    n_beta: f64,
    powers: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscountStructure {
    pub fn new(beta: f64, horizon: usize) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(LabError::validation("beta", format!("must lie in (0,1), got {beta}")));
        }
        if horizon == 0 {
            return Err(LabError::validation("horizon", "must be at least 1"));
        }
        let mut powers = Vec::with_capacity(horizon + 1);
        let mut b = 1.0;
        for _ in 0..=horizon {
            powers.push(b);
            b *= beta;
        }
        // Direct summation; the geometric closed form loses digits near beta = 1.
        let n_beta: f64 = powers[1..].iter().sum();
        let weights = powers[1..].iter().map(|b| b / n_beta).collect();
        Ok(Self {
            beta,
            horizon,
            n_beta,
            powers,
            weights,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Truncation horizon `N` (number of future dates).
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Effective number of commodities `sum_{n=1}^N beta^n`.
    pub fn n_beta(&self) -> f64 {
        self.n_beta
    }

    /// `beta^n` for `n = 0..=N`.
    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// `beta^n` for a single date.
    pub fn power(&self, n: usize) -> f64 {
        self.powers[n]
    }

    /// Normalized commodity weights `pi_n = beta^n / N_beta`, `n = 1..=N`
    /// (index 0 holds date 1).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The benchmark price profile `p_n = beta^n`, `n = 1..=N`.
    pub fn discount_prices(&self) -> Vec<f64> {
        self.powers[1..].to_vec()
    }
}

pub fn effective_commodity_count(d: &DiscountStructure) -> f64 {
    d.n_beta()
}

/// Weighted inner product `(1/N_beta) sum_n beta^n x_n y_n` over future dates.
pub fn beta_inner_product(x: &[f64], y: &[f64], d: &DiscountStructure) -> Result<f64> {
    let n = d.horizon();
    if x.len() != n {
        return Err(LabError::LengthMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if y.len() != n {
        return Err(LabError::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    Ok(d.weights().iter().zip(x).zip(y).map(|((w, a), b)| w * a * b).sum())
}

pub fn beta_norm(x: &[f64], d: &DiscountStructure) -> Result<f64> {
    Ok(beta_inner_product(x, x, d)?.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Log,
    Isoelastic,
}

/// Period utilities of one agent: a common elasticity and one taste per date.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityKernel {
    family: KernelFamily,
    sigma: f64,
    taste: Vec<f64>,
}

/// Elasticities this close to one are evaluated with the log formulas.
pub const LOG_SIGMA_TOL: f64 = 1e-12;

impl UtilityKernel {
    pub fn log(taste: Vec<f64>) -> Result<Self> {
        Self::build(KernelFamily::Log, 1.0, taste)
    }

    pub fn isoelastic(sigma: f64, taste: Vec<f64>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(LabError::validation("sigma", format!("must be positive, got {sigma}")));
        }
        if (sigma - 1.0).abs() < LOG_SIGMA_TOL {
            return Self::build(KernelFamily::Log, 1.0, taste);
        }
        Self::build(KernelFamily::Isoelastic, sigma, taste)
    }

    fn build(family: KernelFamily, sigma: f64, taste: Vec<f64>) -> Result<Self> {
        if taste.is_empty() {
            return Err(LabError::validation("taste", "must not be empty"));
        }
        for (n, t) in taste.iter().enumerate() {
            if !(*t > 0.0 && t.is_finite()) {
                return Err(LabError::validation(
                    format!("taste[{n}]"),
                    format!("must be positive and finite, got {t}"),
                ));
            }
        }
        Ok(Self { family, sigma, taste })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn is_log(&self) -> bool {
        self.family == KernelFamily::Log
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Tastes `tau_0..tau_N`.
    pub fn taste(&self) -> &[f64] {
        &self.taste
    }

    pub fn horizon(&self) -> usize {
        self.taste.len() - 1
    }

    pub fn utility(&self, n: usize, x: f64) -> f64 {
        let tau = self.taste[n];
        if self.is_log() {
            tau * x.ln()
        } else {
            let e = 1.0 - 1.0 / self.sigma;
            tau * (x.powf(e) - 1.0) / e
        }
    }

    pub fn marginal_utility(&self, n: usize, x: f64) -> f64 {
        if self.is_log() {
            self.taste[n] / x
        } else {
            self.taste[n] * x.powf(-1.0 / self.sigma)
        }
    }

    pub fn second_derivative(&self, n: usize, x: f64) -> f64 {
        -self.marginal_utility(n, x) / (self.sigma * x)
    }

    /// `u'/(-u'') = sigma * x` for this family.
    pub fn risk_tolerance(&self, x: f64) -> f64 {
        self.sigma * x
    }
}

/// Risk tolerance `u'_n(x) / (-u''_n(x))` at a positive consumption level.
pub fn risk_tolerance(k: &UtilityKernel, n: usize, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(LabError::NonPositiveInput {
            what: "consumption",
            value: x,
        });
    }
    if n > k.horizon() {
        return Err(LabError::LengthMismatch {
            expected: k.horizon(),
            got: n,
        });
    }
    Ok(k.risk_tolerance(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub kernel: UtilityKernel,
    /// Endowment `omega_0..omega_N`.
    pub endowment: Vec<f64>,
}

impl AgentSpec {
    pub fn new(kernel: UtilityKernel, endowment: Vec<f64>) -> Result<Self> {
        if endowment.len() != kernel.taste().len() {
            return Err(LabError::LengthMismatch {
                expected: kernel.taste().len(),
                got: endowment.len(),
            });
        }
        Ok(Self { kernel, endowment })
    }

    /// Wealth `omega_0 + sum_n p_n omega_n` at future prices `p`.
    pub fn wealth(&self, p: &[f64]) -> f64 {
        self.endowment[0] + p.iter().zip(&self.endowment[1..]).map(|(p, w)| p * w).sum::<f64>()
    }
}

/// A validated finite economy.
#[derive(Debug, Clone, PartialEq)]
pub struct Economy {
    discount: DiscountStructure,
    agents: Vec<AgentSpec>,
    aggregates: Vec<f64>,
}

impl Economy {
    pub fn new(discount: DiscountStructure, agents: Vec<AgentSpec>) -> Result<Self> {
        if agents.is_empty() {
            return Err(LabError::validation("agents", "economy needs at least one agent"));
        }
        let len = discount.horizon() + 1;
        for (i, a) in agents.iter().enumerate() {
            if a.kernel.taste().len() != len {
                return Err(LabError::validation(
                    format!("agents[{i}].taste"),
                    format!("expected {len} entries, got {}", a.kernel.taste().len()),
                ));
            }
            if a.endowment.len() != len {
                return Err(LabError::validation(
                    format!("agents[{i}].endowment"),
                    format!("expected {len} entries, got {}", a.endowment.len()),
                ));
            }
            for (n, w) in a.endowment.iter().enumerate() {
                if !(*w >= 0.0 && w.is_finite()) {
                    return Err(LabError::validation(
                        format!("agents[{i}].endowment[{n}]"),
                        format!("must be finite and non-negative, got {w}"),
                    ));
                }
            }
            let discounted: f64 = discount.powers().iter().zip(&a.endowment).map(|(b, w)| b * w).sum();
            if !(discounted > 0.0) {
                return Err(LabError::validation(
                    format!("agents[{i}].endowment"),
                    "discounted endowment must be positive",
                ));
            }
        }
        let aggregates: Vec<f64> = (0..len).map(|n| agents.iter().map(|a| a.endowment[n]).sum()).collect();
        if let Some(n) = aggregates.iter().position(|o| !(*o > 0.0)) {
            return Err(LabError::validation(
                format!("aggregate endowment[{n}]"),
                "every date needs positive aggregate endowment",
            ));
        }
        Ok(Self {
            discount,
            agents,
            aggregates,
        })
    }

    pub fn discount(&self) -> &DiscountStructure {
        &self.discount
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn horizon(&self) -> usize {
        self.discount.horizon()
    }

    /// Aggregate endowments `Omega_0..Omega_N`.
    pub fn aggregates(&self) -> &[f64] {
        &self.aggregates
    }

    pub fn all_log(&self) -> bool {
        self.agents.iter().all(|a| a.kernel.is_log())
    }

    /// Taste matrix, one row per agent, columns `tau_0..tau_N`.
    pub fn taste_matrix(&self) -> Vec<Vec<f64>> {
        self.agents.iter().map(|a| a.kernel.taste().to_vec()).collect()
    }

    pub fn to_spec(&self) -> EconomySpec {
        EconomySpec {
            beta: self.discount.beta(),
            horizon: self.discount.horizon(),
            agents: self
                .agents
                .iter()
                .map(|a| AgentFileSpec {
                    family: a.kernel.family(),
                    sigma: Some(a.kernel.sigma()),
                    taste: a.kernel.taste().to_vec(),
                    endowment: a.endowment.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_spec())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: EconomySpec = serde_json::from_str(text)?;
        spec.build()
    }
}

/// On-disk economy description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomySpec {
    pub beta: f64,
    pub horizon: usize,
    pub agents: Vec<AgentFileSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentFileSpec {
    pub family: KernelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub taste: Vec<f64>,
    pub endowment: Vec<f64>,
}

impl EconomySpec {
    pub fn build(&self) -> Result<Economy> {
        let discount = DiscountStructure::new(self.beta, self.horizon)?;
        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, a) in self.agents.iter().enumerate() {
            let kernel = match a.family {
                KernelFamily::Log => {
                    if let Some(s) = a.sigma {
                        if (s - 1.0).abs() >= LOG_SIGMA_TOL {
                            return Err(LabError::validation(
                                format!("agents[{i}].sigma"),
                                format!("log kernels have sigma = 1, got {s}"),
                            ));
                        }
                    }
                    UtilityKernel::log(a.taste.clone())
                }
                KernelFamily::Isoelastic => {
                    let s = a.sigma.ok_or_else(|| {
                        LabError::validation(format!("agents[{i}].sigma"), "required for isoelastic kernels")
                    })?;
                    UtilityKernel::isoelastic(s, a.taste.clone())
                }
            }
            .map_err(|e| prefix_path(e, &format!("agents[{i}]")))?;
            agents.push(AgentSpec {
                kernel,
                endowment: a.endowment.clone(),
            });
        }
        Economy::new(discount, agents)
    }
}

fn prefix_path(e: LabError, prefix: &str) -> LabError {
    match e {
        LabError::Validation { path, reason } => LabError::Validation {
            path: format!("{prefix}.{path}"),
            reason,
        },
        other => other,
    }
}
