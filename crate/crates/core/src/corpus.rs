//! Small fixture economies shared by tests, benchmarks and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::economy::{AgentSpec, DiscountStructure, Economy, UtilityKernel};
use crate::error::Result;
use crate::scenarios::{generate, ScenarioFamily, ScenarioSpec};

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub economy: Economy,
}

/// Random heterogeneous economy: `beta` in `[0.75, 0.95]`, roughly a third
/// log agents and the rest isoelastic with `sigma` in `[0.3, 2.5]`, tastes in
/// `[0.5, 1.5]` and endowments in `[0.3, 2]`.
pub fn random_economy(seed: u64, horizon: usize, agents: usize) -> Result<Economy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = rng.random_range(0.75..0.95);
    let d = DiscountStructure::new(beta, horizon)?;
    let mut out = Vec::with_capacity(agents);
    for _ in 0..agents {
        let taste: Vec<f64> = (0..=horizon).map(|_| rng.random_range(0.5..1.5)).collect();
        let endowment: Vec<f64> = (0..=horizon).map(|_| rng.random_range(0.3..2.0)).collect();
        let kernel = if rng.random_bool(1.0 / 3.0) {
            UtilityKernel::log(taste)?
        } else {
            UtilityKernel::isoelastic(rng.random_range(0.3..2.5), taste)?
        };
        out.push(AgentSpec::new(kernel, endowment)?);
    }
    Economy::new(d, out)
}

/// Random all-log economy with the same ranges as [`random_economy`].
pub fn random_log_economy(seed: u64, horizon: usize, agents: usize) -> Result<Economy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = rng.random_range(0.75..0.95);
    let d = DiscountStructure::new(beta, horizon)?;
    let mut out = Vec::with_capacity(agents);
    for _ in 0..agents {
        let taste: Vec<f64> = (0..=horizon).map(|_| rng.random_range(0.5..1.5)).collect();
        let endowment: Vec<f64> = (0..=horizon).map(|_| rng.random_range(0.3..2.0)).collect();
        out.push(AgentSpec::new(UtilityKernel::log(taste)?, endowment)?);
    }
    Economy::new(d, out)
}

/// The standard corpus: one economy per scenario family plus a handful of
/// random heterogeneous ones, all with `N <= 16`.
pub fn corpus() -> Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    let mut push = |name: String, economy: Economy| out.push(CorpusEntry { name, economy });
    let scenario = |family: ScenarioFamily, seed, n, beta, i| generate(&ScenarioSpec::new(family, seed), n, beta, i);

    push("identical".into(), scenario(ScenarioFamily::identical(), 0, 8, 0.9, 3)?);
    push("sparse".into(), scenario(ScenarioFamily::sparse(), 1, 16, 0.9, 6)?);
    push(
        "dispersed".into(),
        scenario(ScenarioFamily::dispersed(), 2, 12, 0.9, 6)?,
    );
    push("two_type".into(), scenario(ScenarioFamily::two_type(), 0, 10, 0.9, 4)?);
    push(
        "isoelastic".into(),
        scenario(ScenarioFamily::isoelastic(), 3, 8, 0.9, 8)?,
    );
    for (k, (n, i)) in [(4, 2), (6, 3), (8, 4), (10, 5), (12, 6)].into_iter().enumerate() {
        push(format!("random_{k}"), random_economy(100 + k as u64, n, i)?);
    }
    for (k, (n, i)) in [(5, 3), (9, 4), (14, 6)].into_iter().enumerate() {
        push(format!("random_log_{k}"), random_log_economy(200 + k as u64, n, i)?);
    }
    Ok(out)
}
