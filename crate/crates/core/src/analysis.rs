//! Slutsky decomposition of the excess-demand Jacobian and the quadratic-form
//! machinery built on it.
//!
//! Matrices follow the `(m, n) = d z_n / d p_m` convention: row index is the
//! price being perturbed, column index the market responding. Quadratic forms
//! and the symmetric part do not depend on the convention.
//!
//! A price perturbation `q` splits as `q = alpha * p + u` with `Psi(u) = 0`,
//! where
//!
//! ```text
//! Psi(q) = sum_i (2 r_i0 + omega_i0 - x_i0) / r_i * r_i^0 * Lambda_i(q)
//! Lambda_i(q) = sum_n r_in q_n / r_i^0
//! ```
//!
//! and then `q' Dz q = -A alpha^2 + R(u) alpha - S(u) + M(u)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::demand::{check_prices, DemandResult};
use crate::economy::{AgentSpec, DiscountStructure, Economy};
use crate::equilibrium::{excess_demand, market_demands, EquilibriumResult};
use crate::error::{LabError, Result};

/// One agent's substitution and income-effect matrices at `(p, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSlutsky {
    pub substitution: DMatrix<f64>,
    pub income: DMatrix<f64>,
    /// `r_0..r_N`.
    pub risk_tolerances: Vec<f64>,
    /// `r_0 + sum_n p_n r_n`.
    pub r_bar: f64,
    /// `sum_n p_n r_n`.
    pub r_bar_future: f64,
}

impl AgentSlutsky {
    pub fn total(&self) -> DMatrix<f64> {
        &self.substitution + &self.income
    }
}

fn check_interior(agent: usize, x: &[f64]) -> Result<()> {
    for (n, v) in x.iter().enumerate() {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(LabError::NonInterior {
                agent,
                date: n,
                value: *v,
            });
        }
    }
    Ok(())
}

fn slutsky_unchecked(agent: &AgentSpec, p: &[f64], x: &[f64]) -> AgentSlutsky {
    let n = p.len();
    let r: Vec<f64> = x.iter().map(|v| agent.kernel.risk_tolerance(*v)).collect();
    let r_bar_future: f64 = p.iter().zip(&r[1..]).map(|(p, r)| p * r).sum();
    let r_bar = r[0] + r_bar_future;
    let substitution = DMatrix::from_fn(n, n, |m, k| {
        let diag = if m == k { r[k + 1] / p[k] } else { 0.0 };
        r[m + 1] * r[k + 1] / r_bar - diag
    });
    let income = DMatrix::from_fn(n, n, |m, k| r[k + 1] / r_bar * (agent.endowment[m + 1] - x[m + 1]));
    AgentSlutsky {
        substitution,
        income,
        risk_tolerances: r,
        r_bar,
        r_bar_future,
    }
}

/// Slutsky matrices of one agent at prices `p` and its demand `x` there.
pub fn agent_slutsky(agent: &AgentSpec, d: &DiscountStructure, p: &[f64], x: &[f64]) -> Result<AgentSlutsky> {
    check_prices(p, d.horizon())?;
    if x.len() != d.horizon() + 1 {
        return Err(LabError::LengthMismatch {
            expected: d.horizon() + 1,
            got: x.len(),
        });
    }
    check_interior(0, x)?;
    Ok(slutsky_unchecked(agent, p, x))
}

/// `sum_i (S_i + M_i)` at prices `p` given every agent's demand there.
pub(crate) fn jacobian_at(e: &Economy, p: &[f64], demands: &[DemandResult]) -> DMatrix<f64> {
    let n = e.horizon();
    let mut jac = DMatrix::zeros(n, n);
    for (agent, dem) in e.agents().iter().zip(demands) {
        let x = &dem.consumption;
        let r: Vec<f64> = x.iter().map(|v| agent.kernel.risk_tolerance(*v)).collect();
        let r_bar = r[0] + p.iter().zip(&r[1..]).map(|(p, r)| p * r).sum::<f64>();
        for k in 0..n {
            let slope = r[k + 1] / r_bar;
            for m in 0..n {
                jac[(m, k)] += slope * (r[m + 1] + agent.endowment[m + 1] - x[m + 1]);
            }
            jac[(k, k)] -= r[k + 1] / p[k];
        }
    }
    jac
}

fn check_equilibrium(e: &Economy, eq: &EquilibriumResult) -> Result<()> {
    check_prices(&eq.prices, e.horizon())?;
    if eq.allocation.len() != e.agent_count() {
        return Err(LabError::LengthMismatch {
            expected: e.agent_count(),
            got: eq.allocation.len(),
        });
    }
    for (i, x) in eq.allocation.iter().enumerate() {
        if x.len() != e.horizon() + 1 {
            return Err(LabError::LengthMismatch {
                expected: e.horizon() + 1,
                got: x.len(),
            });
        }
        check_interior(i, x)?;
    }
    Ok(())
}

pub fn agent_slutsky_all(e: &Economy, eq: &EquilibriumResult) -> Result<Vec<AgentSlutsky>> {
    check_equilibrium(e, eq)?;
    Ok(e.agents()
        .iter()
        .zip(&eq.allocation)
        .map(|(a, x)| slutsky_unchecked(a, &eq.prices, x))
        .collect())
}

/// Analytic Jacobian `Dz(p) = sum_i (S_i + M_i)` at an equilibrium.
pub fn aggregate_jacobian(e: &Economy, eq: &EquilibriumResult) -> Result<DMatrix<f64>> {
    check_equilibrium(e, eq)?;
    let n = e.horizon();
    let mut jac = DMatrix::zeros(n, n);
    for (a, x) in e.agents().iter().zip(&eq.allocation) {
        jac += slutsky_unchecked(a, &eq.prices, x).total();
    }
    Ok(jac)
}

/// Central-difference Jacobian of `z` with steps `rel_step * p_m`, same
/// `(m, n)` convention as the analytic one.
pub fn fd_jacobian(e: &Economy, p: &[f64], rel_step: f64) -> Result<DMatrix<f64>> {
    check_prices(p, e.horizon())?;
    let n = e.horizon();
    let mut jac = DMatrix::zeros(n, n);
    let mut trial = p.to_vec();
    for m in 0..n {
        let h = rel_step * p[m];
        trial[m] = p[m] + h;
        let up = excess_demand(e, &trial)?;
        trial[m] = p[m] - h;
        let down = excess_demand(e, &trial)?;
        trial[m] = p[m];
        for k in 0..n {
            jac[(m, k)] = (up.z[k] - down.z[k]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// `max |a - b| / max |b|`.
pub fn relative_sup_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).amax();
    let scale = b.amax();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Per-agent equilibrium quantities entering `Psi`, `A`, `S`, `R` and `M`.
#[derive(Debug, Clone)]
pub struct EquilibriumGeometry {
    prices: Vec<f64>,
    /// `r[i][n]`, `n = 0..=N`.
    r: Vec<Vec<f64>>,
    r_bar: Vec<f64>,
    r_future: Vec<f64>,
    /// `shares[i][n-1] = p_n r_in / r_i^0`.
    shares: Vec<Vec<f64>>,
    /// `net_sales[i][n] = omega_in - x_in`, `n = 0..=N`.
    net_sales: Vec<Vec<f64>>,
}

impl EquilibriumGeometry {
    pub fn new(e: &Economy, eq: &EquilibriumResult) -> Result<Self> {
        check_equilibrium(e, eq)?;
        let p = &eq.prices;
        let mut r = Vec::new();
        let mut r_bar = Vec::new();
        let mut r_future = Vec::new();
        let mut shares = Vec::new();
        let mut net_sales = Vec::new();
        for (a, x) in e.agents().iter().zip(&eq.allocation) {
            let ri: Vec<f64> = x.iter().map(|v| a.kernel.risk_tolerance(*v)).collect();
            let fut: f64 = p.iter().zip(&ri[1..]).map(|(p, r)| p * r).sum();
            shares.push(p.iter().zip(&ri[1..]).map(|(p, r)| p * r / fut).collect());
            r_bar.push(ri[0] + fut);
            r_future.push(fut);
            net_sales.push(a.endowment.iter().zip(x).map(|(w, x)| w - x).collect());
            r.push(ri);
        }
        Ok(Self {
            prices: p.clone(),
            r,
            r_bar,
            r_future,
            shares,
            net_sales,
        })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn agent_count(&self) -> usize {
        self.r.len()
    }

    /// Equilibrium marginal expenditure shares `m_in`, one row per agent.
    pub fn shares(&self) -> &[Vec<f64>] {
        &self.shares
    }

    pub fn risk_tolerances(&self) -> &[Vec<f64>] {
        &self.r
    }

    pub fn r_bar(&self) -> &[f64] {
        &self.r_bar
    }

    pub fn r_bar_future(&self) -> &[f64] {
        &self.r_future
    }

    /// `Lambda_i(q) = sum_n r_in q_n / r_i^0`.
    pub fn lambda(&self, i: usize, q: &[f64]) -> f64 {
        self.r[i][1..].iter().zip(q).map(|(r, q)| r * q).sum::<f64>() / self.r_future[i]
    }

    fn psi_weight(&self, i: usize) -> f64 {
        (2.0 * self.r[i][0] + self.net_sales[i][0]) / self.r_bar[i]
    }

    pub fn psi(&self, q: &[f64]) -> f64 {
        (0..self.agent_count())
            .map(|i| self.psi_weight(i) * self.r_future[i] * self.lambda(i, q))
            .sum()
    }

    /// `sum_i |psi weight_i| r_i^0`, the natural magnitude of `Psi(p)`.
    pub fn psi_scale(&self) -> f64 {
        (0..self.agent_count())
            .map(|i| self.psi_weight(i).abs() * self.r_future[i])
            .sum()
    }

    pub fn a_term(&self) -> f64 {
        (0..self.agent_count())
            .map(|i| self.r_future[i] / self.r_bar[i] * (self.r[i][0] + self.net_sales[i][0]))
            .sum()
    }

    pub fn s_term(&self, u: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.agent_count() {
            let lam = self.lambda(i, u);
            for (n, p) in self.prices.iter().enumerate() {
                let dev = u[n] - p * lam;
                total += self.r[i][n + 1] / p * dev * dev;
            }
        }
        total
    }

    fn net_value(&self, i: usize, u: &[f64]) -> f64 {
        self.net_sales[i][1..].iter().zip(u).map(|(s, u)| s * u).sum()
    }

    pub fn r_term(&self, u: &[f64]) -> f64 {
        (0..self.agent_count())
            .map(|i| -self.r[i][0] / self.r_bar[i] * self.net_value(i, u))
            .sum()
    }

    pub fn m_term(&self, u: &[f64]) -> f64 {
        (0..self.agent_count())
            .map(|i| {
                let lam = self.lambda(i, u);
                self.r_future[i] / self.r_bar[i] * lam * (self.net_value(i, u) - self.r[i][0] * lam)
            })
            .sum()
    }

    /// Pairwise weights `w_mn = sum_i (p_m r_im)(p_n r_in) / r_i^0`.
    pub fn pair_weights(&self) -> DMatrix<f64> {
        let n = self.prices.len();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..self.agent_count() {
            let scaled: Vec<f64> = self.prices.iter().zip(&self.r[i][1..]).map(|(p, r)| p * r).collect();
            let inv = 1.0 / self.r_future[i];
            for m in 0..n {
                for k in 0..n {
                    w[(m, k)] += scaled[m] * scaled[k] * inv;
                }
            }
        }
        w
    }

    fn checked_psi_denominator(&self) -> Result<f64> {
        let psi = self.psi(&self.prices);
        let scale = self.psi_scale();
        if !(psi.abs() > 1e-12 * scale) {
            return Err(LabError::DegeneratePsi { psi, scale });
        }
        Ok(psi)
    }

    /// `(alpha, u)` with `q = alpha p + u` and `Psi(u) = 0`.
    pub fn decompose(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        if q.len() != self.prices.len() {
            return Err(LabError::LengthMismatch {
                expected: self.prices.len(),
                got: q.len(),
            });
        }
        let alpha = self.psi(q) / self.checked_psi_denominator()?;
        let u = q.iter().zip(&self.prices).map(|(q, p)| q - alpha * p).collect();
        Ok((alpha, u))
    }
}

pub fn decompose_perturbation(e: &Economy, eq: &EquilibriumResult, q: &[f64]) -> Result<(f64, Vec<f64>)> {
    EquilibriumGeometry::new(e, eq)?.decompose(q)
}

/// Projection of a desired distortion onto `ker Psi` along `p`.
pub fn project_to_ker_psi(e: &Economy, eq: &EquilibriumResult, d: &[f64]) -> Result<Vec<f64>> {
    Ok(decompose_perturbation(e, eq, d)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticTerms {
    #[serde(rename = "A")]
    pub a: f64,
    pub s_of_u: f64,
    pub r_of_u: f64,
    pub m_of_u: f64,
    /// `Lambda_i(u)` per agent.
    pub lambda_i: Vec<f64>,
    pub alpha: f64,
    pub u: Vec<f64>,
    pub psi_pbar: f64,
}

impl QuadraticTerms {
    /// `-A alpha^2 + R(u) alpha - S(u) + M(u)`.
    pub fn recomposed(&self) -> f64 {
        -self.a * self.alpha * self.alpha + self.r_of_u * self.alpha - self.s_of_u + self.m_of_u
    }
}

pub fn quadratic_terms(e: &Economy, eq: &EquilibriumResult, q: &[f64]) -> Result<QuadraticTerms> {
    let g = EquilibriumGeometry::new(e, eq)?;
    let (alpha, u) = g.decompose(q)?;
    Ok(QuadraticTerms {
        a: g.a_term(),
        s_of_u: g.s_term(&u),
        r_of_u: g.r_term(&u),
        m_of_u: g.m_term(&u),
        lambda_i: (0..g.agent_count()).map(|i| g.lambda(i, &u)).collect(),
        alpha,
        psi_pbar: g.psi(&g.prices),
        u,
    })
}

/// `q' J q` for a matrix in either orientation.
pub fn quadratic_form(j: &DMatrix<f64>, q: &[f64]) -> f64 {
    let n = q.len();
    let mut total = 0.0;
    for m in 0..n {
        for k in 0..n {
            total += q[m] * j[(m, k)] * q[k];
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphForm {
    pub s_value: f64,
    pub weights: DMatrix<f64>,
}

/// `S(u) = 1/2 sum_{m,n} w_mn (v_m - v_n)^2` with `v_n = u_n / p_n`.
pub fn substitution_graph_form(e: &Economy, eq: &EquilibriumResult, u: &[f64]) -> Result<GraphForm> {
    let g = EquilibriumGeometry::new(e, eq)?;
    if u.len() != eq.prices.len() {
        return Err(LabError::LengthMismatch {
            expected: eq.prices.len(),
            got: u.len(),
        });
    }
    let weights = g.pair_weights();
    let v: Vec<f64> = u.iter().zip(&eq.prices).map(|(u, p)| u / p).collect();
    let n = v.len();
    let mut s = 0.0;
    for m in 0..n {
        for k in (m + 1)..n {
            let gap = v[m] - v[k];
            s += weights[(m, k)] * gap * gap;
        }
    }
    Ok(GraphForm { s_value: s, weights })
}

/// Range of `w_mn / (I N_beta pi_m pi_n)`.
pub fn normalized_weight_band(e: &Economy, weights: &DMatrix<f64>) -> (f64, f64) {
    let d = e.discount();
    let pi = d.weights();
    let scale = e.agent_count() as f64 * d.n_beta();
    let mut band = (f64::INFINITY, f64::NEG_INFINITY);
    for m in 0..pi.len() {
        for k in 0..pi.len() {
            let v = weights[(m, k)] / (scale * pi[m] * pi[k]);
            band = (band.0.min(v), band.1.max(v));
        }
    }
    band
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub s_ratio: f64,
    pub m_ratio: f64,
    pub r_ratio: f64,
    pub a_ratio: f64,
    /// `v_n = u_n / p_n`.
    pub v: Vec<f64>,
    pub v_norm: f64,
}

/// Substitution, income, mixed and proportional terms normalized by their
/// natural orders `I N_beta |v|^2`, `I |v|` and `I`.
pub fn rate_ratios(e: &Economy, eq: &EquilibriumResult, u: &[f64]) -> Result<RateReport> {
    let g = EquilibriumGeometry::new(e, eq)?;
    if u.len() != eq.prices.len() {
        return Err(LabError::LengthMismatch {
            expected: eq.prices.len(),
            got: u.len(),
        });
    }
    let d = e.discount();
    let v: Vec<f64> = u.iter().zip(&eq.prices).map(|(u, p)| u / p).collect();
    let v_norm = crate::economy::beta_norm(&v, d)?;
    if !(v_norm > 0.0) {
        return Err(LabError::ZeroDistortion);
    }
    let count = e.agent_count() as f64;
    let big = count * d.n_beta() * v_norm * v_norm;
    Ok(RateReport {
        s_ratio: g.s_term(u) / big,
        m_ratio: g.m_term(u).abs() / big,
        r_ratio: g.r_term(u).abs() / (count * v_norm),
        a_ratio: g.a_term() / count,
        v,
        v_norm,
    })
}

/// Standard-normal `v_n`, drawn date by date so shorter horizons see a
/// prefix of the same stream, mapped to `u = p * v` and projected onto
/// `ker Psi`.
pub fn random_distortion(e: &Economy, eq: &EquilibriumResult, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<f64> = eq
        .prices
        .iter()
        .map(|p| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            p * xi
        })
        .collect();
    project_to_ker_psi(e, eq, &d)
}

/// `+1` on odd dates, `-1` on even dates.
pub fn odd_even_signs(horizon: usize) -> Vec<f64> {
    (1..=horizon).map(|n| if n % 2 == 1 { 1.0 } else { -1.0 }).collect()
}

/// The odd-even pattern `q_n = eps_n p_n` projected onto `ker Psi`.
pub fn odd_even_distortion(e: &Economy, eq: &EquilibriumResult) -> Result<Vec<f64>> {
    let d: Vec<f64> = odd_even_signs(e.horizon())
        .iter()
        .zip(&eq.prices)
        .map(|(s, p)| s * p)
        .collect();
    project_to_ker_psi(e, eq, &d)
}

/// Helper for callers holding only prices: demands and analytic Jacobian.
pub fn jacobian_at_prices(e: &Economy, p: &[f64]) -> Result<DMatrix<f64>> {
    let demands = market_demands(e, p)?;
    Ok(jacobian_at(e, p, &demands))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economy::UtilityKernel;
    use crate::equilibrium::{solve_equilibrium, SolveOptions};

    fn identical() -> (Economy, EquilibriumResult) {
        let d = DiscountStructure::new(0.85, 6).unwrap();
        let agents = (0..3)
            .map(|_| AgentSpec::new(UtilityKernel::isoelastic(0.6, vec![1.0; 7]).unwrap(), vec![1.5; 7]).unwrap())
            .collect();
        let e = Economy::new(d, agents).unwrap();
        let eq = solve_equilibrium(&e, &SolveOptions::default()).unwrap();
        (e, eq)
    }

    fn heterogeneous() -> (Economy, EquilibriumResult) {
        let d = DiscountStructure::new(0.8, 5).unwrap();
        let a = AgentSpec::new(
            UtilityKernel::isoelastic(0.4, vec![1.0, 1.5, 0.7, 1.2, 0.9, 1.1]).unwrap(),
            vec![2.0, 0.5, 1.0, 1.5, 0.8, 1.0],
        )
        .unwrap();
        let b = AgentSpec::new(
            UtilityKernel::log(vec![1.0, 0.6, 1.3, 0.8, 1.4, 1.0]).unwrap(),
            vec![0.5, 1.5, 1.0, 0.5, 1.2, 1.0],
        )
        .unwrap();
        let c = AgentSpec::new(
            UtilityKernel::isoelastic(2.0, vec![0.8, 1.0, 1.0, 1.6, 0.5, 0.9]).unwrap(),
            vec![1.0, 1.0, 0.7, 1.0, 1.0, 2.0],
        )
        .unwrap();
        let e = Economy::new(d, vec![a, b, c]).unwrap();
        let eq = solve_equilibrium(&e, &SolveOptions::default()).unwrap();
        (e, eq)
    }

    #[test]
    fn autarky_has_no_income_effect() {
        let (e, eq) = identical();
        for s in agent_slutsky_all(&e, &eq).unwrap() {
            assert!(s.income.amax() < 1e-12);
        }
        let jac = aggregate_jacobian(&e, &eq).unwrap();
        assert!((&jac - jac.transpose()).amax() < 1e-12 * jac.amax());
    }

    #[test]
    fn substitution_matrix_is_symmetric_negative_definite() {
        let (e, eq) = heterogeneous();
        for s in agent_slutsky_all(&e, &eq).unwrap() {
            let sym = &s.substitution - s.substitution.transpose();
            assert!(sym.amax() < 1e-14 * s.substitution.amax());
            let eig = s.substitution.clone().symmetric_eigen();
            assert!(eig.eigenvalues.max() < 0.0);
        }
    }

    #[test]
    fn psi_of_price_vector_gives_unit_lambda() {
        let (e, eq) = heterogeneous();
        let g = EquilibriumGeometry::new(&e, &eq).unwrap();
        for i in 0..3 {
            assert!((g.lambda(i, &eq.prices) - 1.0).abs() < 1e-12);
        }
        let (alpha, u) = g.decompose(&eq.prices).unwrap();
        assert!((alpha - 1.0).abs() < 1e-12);
        assert!(u.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn vector_in_kernel_decomposes_to_itself() {
        let (e, eq) = heterogeneous();
        let g = EquilibriumGeometry::new(&e, &eq).unwrap();
        let q = project_to_ker_psi(&e, &eq, &[0.3, -0.2, 0.1, 0.05, -0.4]).unwrap();
        let (alpha, u) = g.decompose(&q).unwrap();
        assert!(alpha.abs() < 1e-12);
        for (a, b) in u.iter().zip(&q) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn proportional_perturbation_costs_only_a() {
        let (e, eq) = heterogeneous();
        let jac = aggregate_jacobian(&e, &eq).unwrap();
        let q: Vec<f64> = eq.prices.iter().map(|p| 2.5 * p).collect();
        let t = quadratic_terms(&e, &eq, &q).unwrap();
        let lhs = quadratic_form(&jac, &q);
        assert!((lhs + t.a * 6.25).abs() <= 1e-8 * (1.0 + lhs.abs()));
    }

    #[test]
    fn identical_agents_have_zero_mixed_and_income_terms() {
        let (e, eq) = identical();
        let q = [0.1, -0.3, 0.2, 0.05, 0.0, -0.1];
        let t = quadratic_terms(&e, &eq, &q).unwrap();
        assert!(t.r_of_u.abs() < 1e-12);
        assert!(t.m_of_u.abs() < 1e-12);
        let u = random_distortion(&e, &eq, 5).unwrap();
        let rates = rate_ratios(&e, &eq, &u).unwrap();
        assert!(rates.m_ratio < 1e-12);
    }

    #[test]
    fn graph_form_vanishes_on_constant_v() {
        let (e, eq) = heterogeneous();
        let u: Vec<f64> = eq.prices.iter().map(|p| 0.7 * p).collect();
        let gf = substitution_graph_form(&e, &eq, &u).unwrap();
        assert!(gf.s_value.abs() < 1e-14);
        assert!(gf.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn zero_distortion_is_an_error() {
        let (e, eq) = heterogeneous();
        assert!(matches!(rate_ratios(&e, &eq, &[0.0; 5]), Err(LabError::ZeroDistortion)));
    }

    #[test]
    fn non_interior_allocation_rejected() {
        let (e, mut eq) = heterogeneous();
        eq.allocation[1][3] = 0.0;
        assert!(matches!(
            aggregate_jacobian(&e, &eq),
            Err(LabError::NonInterior { agent: 1, date: 3, .. })
        ));
    }
}
