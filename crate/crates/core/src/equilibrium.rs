//! Aggregate excess demand, the log-price Newton solver and the closed-form
//! isoelastic oracle.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::jacobian_at;
use crate::demand::{check_prices, endowment_demand, DemandResult};
use crate::economy::{AgentSpec, DiscountStructure, Economy, UtilityKernel};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessDemand {
    /// `z_1..z_N`.
    pub z: Vec<f64>,
    /// Date-0 excess demand.
    pub z0: f64,
}

impl ExcessDemand {
    pub fn sup_norm(&self) -> f64 {
        self.z.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `z_0 + sum_n p_n z_n`, zero by Walras' law.
    pub fn walras_residual(&self, p: &[f64]) -> f64 {
        self.z0 + p.iter().zip(&self.z).map(|(p, z)| p * z).sum::<f64>()
    }
}

/// Every agent's demand at future prices `p`.
pub fn market_demands(e: &Economy, p: &[f64]) -> Result<Vec<DemandResult>> {
    check_prices(p, e.horizon())?;
    e.agents()
        .iter()
        .map(|a| endowment_demand(a, e.discount(), p))
        .collect()
}

fn aggregate(e: &Economy, demands: &[DemandResult]) -> ExcessDemand {
    let omega = e.aggregates();
    let n = e.horizon();
    let mut total = vec![0.0; n + 1];
    for d in demands {
        for (t, x) in total.iter_mut().zip(&d.consumption) {
            *t += x;
        }
    }
    ExcessDemand {
        z0: total[0] - omega[0],
        z: (1..=n).map(|m| total[m] - omega[m]).collect(),
    }
}

pub fn excess_demand(e: &Economy, p: &[f64]) -> Result<ExcessDemand> {
    let demands = market_demands(e, p)?;
    Ok(aggregate(e, &demands))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    /// Future prices `p_1..p_N`; the numeraire price is 1.
    pub prices: Vec<f64>,
    /// `allocation[i][n]`, `n = 0..=N`.
    pub allocation: Vec<Vec<f64>>,
    pub shadow_values: Vec<f64>,
    pub residual_sup: f64,
    /// `q_n = p_n / beta^n`.
    pub price_ratios: Vec<f64>,
    pub iterations: usize,
    pub starts_used: usize,
    /// Largest `|z_0 + sum p_n z_n|` seen over the accepted iterates.
    pub walras_max: f64,
}

impl EquilibriumResult {
    fn from_demands(
        e: &Economy,
        prices: Vec<f64>,
        demands: &[DemandResult],
        residual_sup: f64,
        iterations: usize,
        starts_used: usize,
        walras_max: f64,
    ) -> Self {
        let price_ratios = prices
            .iter()
            .enumerate()
            .map(|(m, p)| p / e.discount().power(m + 1))
            .collect();
        Self {
            allocation: demands.iter().map(|d| d.consumption.clone()).collect(),
            shadow_values: demands.iter().map(|d| d.shadow_value).collect(),
            prices,
            residual_sup,
            price_ratios,
            iterations,
            starts_used,
            walras_max,
        }
    }

    pub fn price_ratio_band(&self) -> (f64, f64) {
        self.price_ratios
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
                (lo.min(*q), hi.max(*q))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Sup-norm tolerance on `z`; `None` means `1e-10 * I`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 200,
            starts: 1,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn tolerance(&self, e: &Economy) -> f64 {
        self.tol.unwrap_or(1e-10 * e.agent_count() as f64)
    }
}

/// Start points: the discount profile, then seeded multiplicative
/// perturbations `beta^n exp(0.5 xi_n)`.
pub fn start_points(e: &Economy, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let base = e.discount().discount_prices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(starts.max(1));
    out.push(base.clone());
    for _ in 1..starts {
        out.push(
            base.iter()
                .map(|b| {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    b * (0.5 * xi).exp()
                })
                .collect(),
        );
    }
    out
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Iterate {
    prices: Vec<f64>,
    demands: Vec<DemandResult>,
    excess: ExcessDemand,
}

fn evaluate(e: &Economy, log_prices: &[f64]) -> Option<Iterate> {
    let prices: Vec<f64> = log_prices.iter().map(|y| y.exp()).collect();
    let demands = market_demands(e, &prices).ok()?;
    let excess = aggregate(e, &demands);
    if excess.z.iter().all(|v| v.is_finite()) && excess.z0.is_finite() {
        Some(Iterate {
            prices,
            demands,
            excess,
        })
    } else {
        None
    }
}

/// Step along `dir` from `y`, halving until `||z||_2` decreases.
fn line_search(e: &Economy, y: &[f64], dir: &[f64], current: f64) -> Option<(Vec<f64>, Iterate)> {
    let biggest = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut t = if biggest > 2.0 { 2.0 / biggest } else { 1.0 };
    for _ in 0..50 {
        let trial: Vec<f64> = y.iter().zip(dir).map(|(a, b)| a + t * b).collect();
        if let Some(it) = evaluate(e, &trial) {
            if l2(&it.excess.z) < current {
                return Some((trial, it));
            }
        }
        t *= 0.5;
    }
    None
}

/// Damped Newton iteration on log-prices from one start point.
pub fn solve_from(e: &Economy, p0: &[f64], opts: &SolveOptions) -> Result<EquilibriumResult> {
    check_prices(p0, e.horizon())?;
    let tol = opts.tolerance(e);
    let mut y: Vec<f64> = p0.iter().map(|p| p.ln()).collect();
    let mut it = evaluate(e, &y).ok_or(LabError::NoConvergence {
        best_residual: f64::INFINITY,
        iterations: 0,
    })?;
    let mut walras_max = it.excess.walras_residual(&it.prices).abs();
    let omega = e.aggregates();
    let n = e.horizon();
    for iteration in 0..=opts.max_iter {
        let res = it.excess.sup_norm();
        if res <= tol {
            return Ok(EquilibriumResult::from_demands(
                e,
                it.prices,
                &it.demands,
                res,
                iteration,
                1,
                walras_max,
            ));
        }
        if iteration == opts.max_iter {
            return Err(LabError::NoConvergence {
                best_residual: res,
                iterations: iteration,
            });
        }
        let current = l2(&it.excess.z);
        let jac = jacobian_at(e, &it.prices, &it.demands);
        // d z_n / d log p_m = p_m * dz_n/dp_m; `jac` stores (m, n) = dz_n/dp_m.
        let jy = DMatrix::from_fn(n, n, |row, col| jac[(col, row)] * it.prices[col]);
        let rhs = DVector::from_iterator(n, it.excess.z.iter().map(|v| -v));
        let newton = jy
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .map(|s| s.as_slice().to_vec());
        let singular = newton.is_none();
        let mut step = newton.and_then(|dir| line_search(e, &y, &dir, current));
        if step.is_none() {
            // Damped fixed-point step: raise prices where demand is in excess.
            let dir: Vec<f64> = (0..n).map(|m| it.excess.z[m] / omega[m + 1]).collect();
            step = line_search(e, &y, &dir, current);
        }
        match step {
            Some((ny, nit)) => {
                y = ny;
                it = nit;
                walras_max = walras_max.max(it.excess.walras_residual(&it.prices).abs());
            }
            None if singular => return Err(LabError::JacobianSingular { residual: res }),
            None => {
                return Err(LabError::NoConvergence {
                    best_residual: res,
                    iterations: iteration,
                })
            }
        }
    }
    unreachable!("loop returns on the final iteration")
}

/// Tries the seeded start points in order and returns the first converged
/// solve.
pub fn solve_equilibrium(e: &Economy, opts: &SolveOptions) -> Result<EquilibriumResult> {
    let mut best = f64::INFINITY;
    let mut total_iters = 0;
    for (k, p0) in start_points(e, opts.starts.max(1), opts.seed).iter().enumerate() {
        match solve_from(e, p0, opts) {
            Ok(mut r) => {
                r.starts_used = k + 1;
                return Ok(r);
            }
            Err(LabError::NoConvergence {
                best_residual,
                iterations,
            }) => {
                best = best.min(best_residual);
                total_iters += iterations;
            }
            Err(LabError::JacobianSingular { residual }) => best = best.min(residual),
            Err(other) => return Err(other),
        }
    }
    Err(LabError::NoConvergence {
        best_residual: best,
        iterations: total_iters,
    })
}

/// Parameters of the isoelastic example with balanced taste shocks and
/// endowments `omega_bar + eta_i s_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoelasticParams {
    pub horizon: usize,
    pub beta: f64,
    pub sigma: f64,
    pub delta: f64,
    pub omega_bar: f64,
    /// `s_0..s_N`.
    pub s: Vec<f64>,
    /// `eps[i][n-1]` for `n = 1..=N`.
    pub eps: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
}

/// Tolerance on the normalized balance conditions.
pub const BALANCE_TOL: f64 = 1e-12;

impl IsoelasticParams {
    pub fn discount(&self) -> Result<DiscountStructure> {
        DiscountStructure::new(self.beta, self.horizon)
    }

    /// Sup residuals of the four balance conditions, in order: date balance
    /// per agent, zero mean per date, zero mean `eta`, `eta`-orthogonality.
    pub fn balance_residuals(&self) -> Result<[f64; 4]> {
        let d = self.discount()?;
        let count = self.eta.len() as f64;
        let n = self.horizon;
        let row = self
            .eps
            .iter()
            .map(|r| (r.iter().zip(&d.powers()[1..]).map(|(e, b)| e * b).sum::<f64>() / d.n_beta()).abs())
            .fold(0.0, f64::max);
        let col = (0..n)
            .map(|m| (self.eps.iter().map(|r| r[m]).sum::<f64>() / count).abs())
            .fold(0.0, f64::max);
        let eta = (self.eta.iter().sum::<f64>() / count).abs();
        let cross = (0..n)
            .map(|m| (self.eps.iter().zip(&self.eta).map(|(r, h)| h * r[m]).sum::<f64>() / count).abs())
            .fold(0.0, f64::max);
        Ok([row, col, eta, cross])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.horizon;
        if self.eps.len() != self.eta.len() || self.eta.is_empty() {
            return Err(LabError::validation(
                "eps",
                "needs one row per agent and at least one agent",
            ));
        }
        if self.s.len() != n + 1 {
            return Err(LabError::LengthMismatch {
                expected: n + 1,
                got: self.s.len(),
            });
        }
        for (i, r) in self.eps.iter().enumerate() {
            if r.len() != n {
                return Err(LabError::validation(
                    format!("eps[{i}]"),
                    format!("expected {n} entries"),
                ));
            }
            for v in r {
                if !(1.0 + self.delta * v > 0.0) {
                    return Err(LabError::BoundViolation {
                        min_value: 1.0 + self.delta * v,
                    });
                }
            }
        }
        if !(self.sigma > 0.0 && self.omega_bar > 0.0) {
            return Err(LabError::validation("sigma/omega_bar", "must be positive"));
        }
        let names = [
            "date balance sum_n beta^n eps_in = 0",
            "zero mean sum_i eps_in = 0",
            "zero mean sum_i eta_i = 0",
            "orthogonality sum_i eta_i eps_in = 0",
        ];
        for (name, r) in names.iter().zip(self.balance_residuals()?) {
            if r > BALANCE_TOL {
                return Err(LabError::ConstraintViolation {
                    condition: (*name).into(),
                    magnitude: r,
                });
            }
        }
        Ok(())
    }

    /// The economy these parameters describe.
    pub fn to_economy(&self) -> Result<Economy> {
        let d = self.discount()?;
        let mut agents = Vec::with_capacity(self.eta.len());
        for (row, eta) in self.eps.iter().zip(&self.eta) {
            let mut taste = vec![1.0];
            taste.extend(row.iter().map(|e| (1.0 + self.delta * e).powf(1.0 / self.sigma)));
            let kernel = UtilityKernel::isoelastic(self.sigma, taste)?;
            let endowment = self.s.iter().map(|s| self.omega_bar + eta * s).collect();
            agents.push(AgentSpec::new(kernel, endowment)?);
        }
        Economy::new(d, agents)
    }

    /// `s^{N,beta} = (s_0 + sum beta^n s_n) / (1 + N_beta)`.
    pub fn averaged_shift(&self) -> Result<f64> {
        let d = self.discount()?;
        let num: f64 = self.s.iter().zip(d.powers()).map(|(s, b)| s * b).sum();
        Ok(num / (1.0 + d.n_beta()))
    }
}

/// Closed-form equilibrium of the balanced isoelastic economy: `p_n = beta^n`,
/// `x_i0 = omega_bar + eta_i s`, `x_in = x_i0 (1 + delta eps_in)` and
/// `lambda_i = x_i0^(-1/sigma)`.
pub fn isoelastic_example_oracle(params: &IsoelasticParams) -> Result<EquilibriumResult> {
    params.validate()?;
    let d = params.discount()?;
    let shift = params.averaged_shift()?;
    let mut allocation = Vec::with_capacity(params.eta.len());
    let mut shadow_values = Vec::with_capacity(params.eta.len());
    for (row, eta) in params.eps.iter().zip(&params.eta) {
        let mu = params.omega_bar + eta * shift;
        let mut x = vec![mu];
        x.extend(row.iter().map(|e| mu * (1.0 + params.delta * e)));
        allocation.push(x);
        shadow_values.push(mu.powf(-1.0 / params.sigma));
    }
    Ok(EquilibriumResult {
        prices: d.discount_prices(),
        allocation,
        shadow_values,
        residual_sup: 0.0,
        price_ratios: vec![1.0; params.horizon],
        iterations: 0,
        starts_used: 0,
        walras_max: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_agent_log() -> Economy {
        let d = DiscountStructure::new(0.9, 3).unwrap();
        let a = AgentSpec::new(
            UtilityKernel::log(vec![1.0, 2.0, 0.5, 1.0]).unwrap(),
            vec![1.0, 0.5, 2.0, 1.0],
        )
        .unwrap();
        let b = AgentSpec::new(
            UtilityKernel::log(vec![1.0, 0.6, 1.4, 2.2]).unwrap(),
            vec![2.0, 1.5, 0.5, 1.0],
        )
        .unwrap();
        Economy::new(d, vec![a, b]).unwrap()
    }

    #[test]
    fn walras_law_holds_at_arbitrary_prices() {
        let e = two_agent_log();
        for p in [vec![0.3, 0.9, 1.7], vec![2.0, 0.01, 0.5]] {
            let ex = excess_demand(&e, &p).unwrap();
            let scale = 1.0 + p.iter().sum::<f64>();
            assert!(ex.walras_residual(&p).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn identical_agents_clear_at_discount_prices() {
        let d = DiscountStructure::new(0.8, 5).unwrap();
        let agents = (0..3)
            .map(|_| AgentSpec::new(UtilityKernel::isoelastic(0.5, vec![1.0; 6]).unwrap(), vec![2.0; 6]).unwrap())
            .collect();
        let e = Economy::new(d, agents).unwrap();
        let r = solve_equilibrium(&e, &SolveOptions::default()).unwrap();
        for (p, b) in r.prices.iter().zip(&e.discount().powers()[1..]) {
            assert!((p - b).abs() <= 1e-12 * b);
        }
        for row in &r.allocation {
            for x in row {
                assert!((x - 2.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn solver_converges_from_perturbed_starts() {
        let e = two_agent_log();
        let opts = SolveOptions::default();
        let reference = solve_equilibrium(&e, &opts).unwrap();
        for p0 in start_points(&e, 8, 3) {
            let r = solve_from(&e, &p0, &opts).unwrap();
            assert!(r.residual_sup <= opts.tolerance(&e));
            for (a, b) in r.prices.iter().zip(&reference.prices) {
                assert!((a.ln() - b.ln()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn start_points_are_seeded() {
        let e = two_agent_log();
        assert_eq!(start_points(&e, 5, 11), start_points(&e, 5, 11));
        assert_ne!(start_points(&e, 5, 11), start_points(&e, 5, 12));
        assert_eq!(start_points(&e, 5, 11)[0], e.discount().discount_prices());
    }

    #[test]
    fn oracle_rejects_unbalanced_shocks() {
        let params = IsoelasticParams {
            horizon: 2,
            beta: 0.5,
            sigma: 0.5,
            delta: 0.2,
            omega_bar: 1.0,
            s: vec![0.3; 3],
            eps: vec![vec![1.0, -2.0], vec![1.0, -2.0], vec![-1.0, 2.0], vec![-1.0, 2.0]],
            eta: vec![1.0, -1.0, 1.0, -1.0],
        };
        assert!(isoelastic_example_oracle(&params).is_ok());
        let mut bad = params.clone();
        bad.eps[0][0] = -1.0;
        match isoelastic_example_oracle(&bad) {
            Err(LabError::ConstraintViolation { condition, .. }) => assert!(condition.contains("date balance")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_shift_profile_is_preserved() {
        let params = IsoelasticParams {
            horizon: 7,
            beta: 0.9,
            sigma: 0.5,
            delta: 0.1,
            omega_bar: 1.0,
            s: vec![0.35; 8],
            eps: vec![vec![0.0; 7]; 2],
            eta: vec![1.0, -1.0],
        };
        assert!((params.averaged_shift().unwrap() - 0.35).abs() < 1e-15);
    }
}
