//! Seeded generators for the five scenario families.
//!
//! Random draws are made date by date, so for a fixed seed the economy at
//! horizon `N` shares its first dates with the economy at any longer
//! horizon (up to the exact rebalancing steps).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::economy::{AgentSpec, DiscountStructure, Economy, UtilityKernel};
use crate::equilibrium::{IsoelasticParams, BALANCE_TOL};
use crate::error::{LabError, Result};

/// Lower bound kept on every `1 + delta * eps`.
pub const TASTE_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScenarioFamily {
    /// Common kernel, constant tastes and endowments.
    IdenticalBenchmark { sigma: f64, omega: f64 },
    /// Log agents with a unit baseline raised by `amplitude` on one block
    /// of `width` consecutive dates, capped so the discounted deviation
    /// mass `sum_block beta^n h` stays at most `mass`.
    SparseTastes { width: usize, amplitude: f64, mass: f64 },
    /// Log agents, `tau_in = (1 + delta eps_in) / N_beta`, unit endowments.
    DispersedHeterogeneity { delta: f64 },
    /// Two equal halves with opposite odd-even taste distortions.
    TwoTypeCounterexample { delta: f64 },
    /// Isoelastic agents in balanced quadruples with endowments
    /// `omega_bar + eta_i s_n`; `s` defaults to `0.4 + 0.2 (-1)^n`.
    IsoelasticExample {
        sigma: f64,
        delta: f64,
        omega_bar: f64,
        eps_amplitude: f64,
        s: Option<Vec<f64>>,
    },
}

impl ScenarioFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioFamily::IdenticalBenchmark { .. } => "identical",
            ScenarioFamily::SparseTastes { .. } => "sparse",
            ScenarioFamily::DispersedHeterogeneity { .. } => "dispersed",
            ScenarioFamily::TwoTypeCounterexample { .. } => "two_type",
            ScenarioFamily::IsoelasticExample { .. } => "isoelastic",
        }
    }

    pub fn identical() -> Self {
        ScenarioFamily::IdenticalBenchmark { sigma: 0.5, omega: 1.0 }
    }

    pub fn sparse() -> Self {
        ScenarioFamily::SparseTastes {
            width: 3,
            amplitude: 1.0,
            mass: 1.0,
        }
    }

    pub fn dispersed() -> Self {
        ScenarioFamily::DispersedHeterogeneity { delta: 0.4 }
    }

    pub fn two_type() -> Self {
        ScenarioFamily::TwoTypeCounterexample { delta: 0.5 }
    }

    pub fn isoelastic() -> Self {
        ScenarioFamily::IsoelasticExample {
            sigma: 0.2,
            delta: 0.3,
            omega_bar: 1.0,
            eps_amplitude: 2.0,
            s: None,
        }
    }

    /// Default parameters for a family name as used on the command line.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "identical" => Ok(Self::identical()),
            "sparse" => Ok(Self::sparse()),
            "dispersed" => Ok(Self::dispersed()),
            "two_type" | "two-type" => Ok(Self::two_type()),
            "isoelastic" => Ok(Self::isoelastic()),
            other => Err(LabError::validation(
                "family",
                format!("unknown scenario family `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(flatten)]
    pub family: ScenarioFamily,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(family: ScenarioFamily, seed: u64) -> Self {
        Self { family, seed }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::validation(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    Ok(())
}

/// Scales `eps` so that `min(1 + delta eps) >= TASTE_FLOOR`.
fn enforce_floor(eps: &mut [Vec<f64>], delta: f64) -> Result<()> {
    let lowest = eps.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if 1.0 + delta * lowest < TASTE_FLOOR {
        let c = (1.0 - TASTE_FLOOR) / (-delta * lowest);
        eps.iter_mut().flatten().for_each(|v| *v *= c);
    }
    let lowest = eps.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if 1.0 + delta * lowest < TASTE_FLOOR - 1e-12 {
        return Err(LabError::BoundViolation {
            min_value: 1.0 + delta * lowest,
        });
    }
    Ok(())
}

/// Removes each row's discounted mean so `sum_n beta^n eps_in = 0`.
fn balance_rows(eps: &mut [Vec<f64>], d: &DiscountStructure) {
    for row in eps.iter_mut() {
        let mean = row.iter().zip(&d.powers()[1..]).map(|(e, b)| e * b).sum::<f64>() / d.n_beta();
        row.iter_mut().for_each(|v| *v -= mean);
    }
}

/// Seeded +/-1 pattern, drawn date by date, centred across agents and then
/// balanced across dates. Both projections commute, so the result satisfies
/// both constraints.
pub fn dispersed_deviations(d: &DiscountStructure, agents: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = d.horizon();
    let mut eps = vec![vec![0.0; n]; agents];
    for m in 0..n {
        for row in eps.iter_mut() {
            row[m] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let mean = eps.iter().map(|r| r[m]).sum::<f64>() / agents as f64;
        eps.iter_mut().for_each(|r| r[m] -= mean);
    }
    balance_rows(&mut eps, d);
    eps
}

/// `+1` on odd dates and `-1` on even dates.
pub fn odd_even(horizon: usize) -> Vec<f64> {
    (1..=horizon).map(|n| if n % 2 == 1 { 1.0 } else { -1.0 }).collect()
}

/// `E = sum_n beta^n eps_n` for the odd-even pattern.
pub fn odd_even_discounted_sum(d: &DiscountStructure) -> f64 {
    odd_even(d.horizon())
        .iter()
        .zip(&d.powers()[1..])
        .map(|(e, b)| e * b)
        .sum()
}

/// `Lambda_A` for the odd-even price distortion in the two-type economy:
/// `(E + delta N_beta) / (N_beta + delta E)`; `Lambda_B` uses `-delta`.
pub fn two_type_lambda(d: &DiscountStructure, delta: f64) -> f64 {
    let e = odd_even_discounted_sum(d);
    (e + delta * d.n_beta()) / (d.n_beta() + delta * e)
}

/// Parameters of the balanced isoelastic example.
///
/// Agents come in quadruples `(eta, eps) = (+1, a), (-1, a), (+1, -a), (-1, -a)`
/// with a seeded sign pattern `a` of the given amplitude, so the zero-mean
/// and orthogonality conditions hold by symmetry.
pub fn isoelastic_params(
    family: &ScenarioFamily,
    horizon: usize,
    beta: f64,
    agents: usize,
    seed: u64,
) -> Result<IsoelasticParams> {
    let ScenarioFamily::IsoelasticExample {
        sigma,
        delta,
        omega_bar,
        eps_amplitude,
        s,
    } = family
    else {
        return Err(LabError::validation(
            "family",
            "isoelastic parameters requested for another family",
        ));
    };
    check_delta(*delta)?;
    if agents == 0 || !agents.is_multiple_of(4) {
        return Err(LabError::InfeasibleConstraints(format!(
            "isoelastic example needs a positive multiple of 4 agents, got {agents}"
        )));
    }
    let d = DiscountStructure::new(beta, horizon)?;
    let s = match s {
        Some(s) if s.len() == horizon + 1 => s.clone(),
        Some(s) => {
            return Err(LabError::LengthMismatch {
                expected: horizon + 1,
                got: s.len(),
            })
        }
        None => (0..=horizon).map(|n| if n % 2 == 0 { 0.6 } else { 0.2 }).collect(),
    };
    if s.iter().any(|v| !(*v > 0.0 && *v < *omega_bar)) {
        return Err(LabError::validation("s", "entries must lie in (0, omega_bar)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quads = agents / 4;
    let mut base = vec![vec![0.0; horizon]; quads];
    for m in 0..horizon {
        for row in base.iter_mut() {
            row[m] = if rng.random::<bool>() {
                *eps_amplitude
            } else {
                -*eps_amplitude
            };
        }
    }
    balance_rows(&mut base, &d);
    // Rows enter with both signs, so the floor binds on the largest |a_n|.
    let peak = base.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if 1.0 - delta * peak < TASTE_FLOOR {
        let c = (1.0 - TASTE_FLOOR) / (delta * peak);
        base.iter_mut().flatten().for_each(|v| *v *= c);
    }
    let mut eps = Vec::with_capacity(agents);
    let mut eta = Vec::with_capacity(agents);
    for row in &base {
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        eps.extend([row.clone(), row.clone(), neg.clone(), neg]);
        eta.extend([1.0, -1.0, 1.0, -1.0]);
    }
    Ok(IsoelasticParams {
        horizon,
        beta,
        sigma: *sigma,
        delta: *delta,
        omega_bar: *omega_bar,
        s,
        eps,
        eta,
    })
}

fn sparse_economy(
    d: DiscountStructure,
    agents: usize,
    width: usize,
    amplitude: f64,
    mass: f64,
    seed: u64,
) -> Result<Economy> {
    let n = d.horizon();
    if width == 0 || width > n {
        return Err(LabError::validation(
            "width",
            format!("must lie in 1..={n}, got {width}"),
        ));
    }
    if !(amplitude > 0.0 && mass > 0.0) {
        return Err(LabError::validation("amplitude/mass", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(agents);
    for _ in 0..agents {
        let start = rng.random_range(1..=n - width + 1);
        let block_weight: f64 = (start..start + width).map(|m| d.power(m)).sum();
        let h = amplitude.min(mass / block_weight);
        let mut taste = vec![1.0; n + 1];
        (start..start + width).for_each(|m| taste[m] += h);
        out.push(AgentSpec::new(UtilityKernel::log(taste)?, vec![1.0; n + 1])?);
    }
    Economy::new(d, out)
}

/// Builds the economy for `spec` at horizon `N`, discount `beta` and `I`
/// agents.
pub fn generate(spec: &ScenarioSpec, horizon: usize, beta: f64, agents: usize) -> Result<Economy> {
    if agents == 0 {
        return Err(LabError::validation("agents", "need at least one agent"));
    }
    let d = DiscountStructure::new(beta, horizon)?;
    let n = horizon;
    match &spec.family {
        ScenarioFamily::IdenticalBenchmark { sigma, omega } => {
            let kernel = UtilityKernel::isoelastic(*sigma, vec![1.0; n + 1])?;
            let agent = AgentSpec::new(kernel, vec![*omega; n + 1])?;
            Economy::new(d, vec![agent; agents])
        }
        ScenarioFamily::SparseTastes { width, amplitude, mass } => {
            sparse_economy(d, agents, *width, *amplitude, *mass, spec.seed)
        }
        ScenarioFamily::DispersedHeterogeneity { delta } => {
            check_delta(*delta)?;
            if agents < 2 {
                return Err(LabError::InfeasibleConstraints(
                    "dispersed heterogeneity needs at least 2 agents".into(),
                ));
            }
            let mut eps = dispersed_deviations(&d, agents, spec.seed);
            enforce_floor(&mut eps, *delta)?;
            let scale = 1.0 / d.n_beta();
            let mut out = Vec::with_capacity(agents);
            for row in &eps {
                let mut taste = vec![scale];
                taste.extend(row.iter().map(|e| scale * (1.0 + delta * e)));
                out.push(AgentSpec::new(UtilityKernel::log(taste)?, vec![1.0; n + 1])?);
            }
            Economy::new(d, out)
        }
        ScenarioFamily::TwoTypeCounterexample { delta } => {
            check_delta(*delta)?;
            if !agents.is_multiple_of(2) {
                return Err(LabError::InfeasibleConstraints(format!(
                    "two-type economy needs an even number of agents, got {agents}"
                )));
            }
            let pattern = odd_even(n);
            let mut out = Vec::with_capacity(agents);
            for sign in [1.0, -1.0] {
                let mut taste = vec![1.0];
                taste.extend(pattern.iter().map(|e| 1.0 + sign * delta * e));
                let agent = AgentSpec::new(UtilityKernel::log(taste)?, vec![1.0; n + 1])?;
                out.extend(std::iter::repeat_n(agent, agents / 2));
            }
            Economy::new(d, out)
        }
        family @ ScenarioFamily::IsoelasticExample { .. } => {
            isoelastic_params(family, horizon, beta, agents, spec.seed)?.to_economy()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub condition: String,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
    pub pass: bool,
}

impl ConstraintReport {
    fn new(raw: Vec<(&str, f64)>) -> Self {
        let checks: Vec<ConstraintCheck> = raw
            .into_iter()
            .map(|(c, r)| ConstraintCheck {
                condition: c.to_string(),
                residual: r,
                pass: r <= BALANCE_TOL,
            })
            .collect();
        let pass = checks.iter().all(|c| c.pass);
        Self { checks, pass }
    }

    /// Names of the failing conditions.
    pub fn violations(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.condition.as_str())
            .collect()
    }
}

fn row_balance(eps: &[Vec<f64>], d: &DiscountStructure) -> f64 {
    eps.iter()
        .map(|r| (r.iter().zip(&d.powers()[1..]).map(|(e, b)| e * b).sum::<f64>() / d.n_beta()).abs())
        .fold(0.0, f64::max)
}

fn column_mean(eps: &[Vec<f64>], weights: &[f64]) -> f64 {
    let n = eps.first().map_or(0, Vec::len);
    let count = eps.len() as f64;
    (0..n)
        .map(|m| (eps.iter().zip(weights).map(|(r, w)| w * r[m]).sum::<f64>() / count).abs())
        .fold(0.0, f64::max)
}

/// Sup residual of each balance condition that applies to the family,
/// recovered from the economy's primitives.
pub fn verify_constraints(e: &Economy, spec: &ScenarioSpec) -> ConstraintReport {
    let d = e.discount();
    let ones = vec![1.0; e.agent_count()];
    match &spec.family {
        ScenarioFamily::IdenticalBenchmark { .. } => ConstraintReport::new(Vec::new()),
        ScenarioFamily::SparseTastes { mass, .. } => {
            let excess = e
                .agents()
                .iter()
                .map(|a| {
                    let dev: f64 = a.kernel.taste()[1..]
                        .iter()
                        .zip(&d.powers()[1..])
                        .map(|(t, b)| b * (t - 1.0).abs())
                        .sum();
                    (dev - mass).max(0.0)
                })
                .fold(0.0, f64::max);
            ConstraintReport::new(vec![("deviation mass sum_n beta^n |tau_in - 1| <= mass", excess)])
        }
        ScenarioFamily::DispersedHeterogeneity { delta } => {
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
            ConstraintReport::new(vec![
                ("date balance sum_n beta^n eps_in = 0", row_balance(&eps, d)),
                ("zero mean sum_i eps_in = 0", column_mean(&eps, &ones)),
            ])
        }
        ScenarioFamily::TwoTypeCounterexample { delta } => {
            let half = e.agent_count() / 2;
            let pattern = odd_even(d.horizon());
            let mismatch = e
                .agents()
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let sign = if i < half { 1.0 } else { -1.0 };
                    a.kernel.taste()[1..]
                        .iter()
                        .zip(&pattern)
                        .map(|(t, p)| (t - 1.0 - sign * delta * p).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            let parity = (e.agent_count() % 2) as f64;
            ConstraintReport::new(vec![
                ("equal halves", parity),
                ("opposite odd-even distortions", mismatch),
            ])
        }
        ScenarioFamily::IsoelasticExample { delta, omega_bar, .. } => {
            let eps: Vec<Vec<f64>> = e
                .agents()
                .iter()
                .map(|a| {
                    let s = a.kernel.sigma();
                    a.kernel.taste()[1..]
                        .iter()
                        .map(|t| (t.powf(s) - 1.0) / delta)
                        .collect()
                })
                .collect();
            let s0 = {
                // Endowment spread at date 0 recovers |s_0|.
                let hi = e
                    .agents()
                    .iter()
                    .map(|a| a.endowment[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                hi - omega_bar
            };
            let eta: Vec<f64> = e.agents().iter().map(|a| (a.endowment[0] - omega_bar) / s0).collect();
            let count = eta.len() as f64;
            ConstraintReport::new(vec![
                ("date balance sum_n beta^n eps_in = 0", row_balance(&eps, d)),
                ("zero mean sum_i eps_in = 0", column_mean(&eps, &ones)),
                ("zero mean sum_i eta_i = 0", (eta.iter().sum::<f64>() / count).abs()),
                ("orthogonality sum_i eta_i eps_in = 0", column_mean(&eps, &eta)),
            ])
        }
    }
}
