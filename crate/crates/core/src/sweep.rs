//! Parameter sweeps over `(N, beta, I, seed)` cells with ordered, per-cell
//! fault-isolated output.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{odd_even_distortion, random_distortion, rate_ratios, RateReport};
use crate::diversification::diversification_report;
use crate::equilibrium::{solve_equilibrium, SolveOptions};
use crate::error::{LabError, Result};
use crate::scenarios::{generate, ScenarioSpec};
use crate::stability::{equilibrium_stability, uniqueness_probe};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub horizon: usize,
    pub beta: f64,
    pub agents: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SweepCellKey {
    beta: f64,
    agents: usize,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub scenario: ScenarioSpec,
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    /// Full product of horizons, discounts, agent counts and seeds, with
    /// horizons varying fastest.
    pub fn product(scenario: ScenarioSpec, horizons: &[usize], betas: &[f64], agents: &[usize], seeds: &[u64]) -> Self {
        let mut cells = Vec::new();
        for &seed in seeds {
            for &beta in betas {
                for &i in agents {
                    for &n in horizons {
                        cells.push(SweepCell {
                            horizon: n,
                            beta,
                            agents: i,
                            seed,
                        });
                    }
                }
            }
        }
        Self { scenario, cells }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DistortionPolicy {
    /// Average of `draws` seeded standard-normal `v` profiles projected
    /// onto `ker Psi`.
    SeededRandom { draws: usize },
    /// The odd-even pattern projected onto `ker Psi`.
    OddEven,
}

impl Default for DistortionPolicy {
    fn default() -> Self {
        DistortionPolicy::SeededRandom { draws: 1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub policy: DistortionPolicy,
    pub solve: SolveOptions,
    /// Multi-start uniqueness probe size; 0 skips it.
    pub uniqueness_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub horizon: usize,
    pub beta: f64,
    pub agents: usize,
    pub seed: u64,
    pub n_beta: f64,
    /// `ok` or the error message of the first failing stage.
    pub status: String,
    pub residual_sup: Option<f64>,
    pub iterations: Option<usize>,
    pub max_sym_eig: Option<f64>,
    pub negative_definite: Option<bool>,
    pub index: Option<i8>,
    pub a5: Option<f64>,
    pub a5_prime: Option<f64>,
    pub spectral_sum_sq: Option<f64>,
    pub s_ratio: Option<f64>,
    pub m_ratio: Option<f64>,
    pub r_ratio: Option<f64>,
    pub a_ratio: Option<f64>,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    pub clusters: Option<usize>,
    pub wall_time_ms: f64,
}

impl SweepRow {
    fn empty(family: &str, cell: &SweepCell) -> Self {
        Self {
            family: family.to_string(),
            horizon: cell.horizon,
            beta: cell.beta,
            agents: cell.agents,
            seed: cell.seed,
            n_beta: f64::NAN,
            status: String::new(),
            residual_sup: None,
            iterations: None,
            max_sym_eig: None,
            negative_definite: None,
            index: None,
            a5: None,
            a5_prime: None,
            spectral_sum_sq: None,
            s_ratio: None,
            m_ratio: None,
            r_ratio: None,
            a_ratio: None,
            q_min: None,
            q_max: None,
            clusters: None,
            wall_time_ms: 0.0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Seed of the `k`-th distortion draw in a cell; independent of the horizon
/// so that longer horizons extend the same draws.
fn draw_seed(cell_seed: u64, k: usize) -> u64 {
    cell_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((k as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn average(reports: &[RateReport]) -> (f64, f64, f64, f64) {
    let k = reports.len() as f64;
    let sum = |f: fn(&RateReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    (
        sum(|r| r.s_ratio),
        sum(|r| r.m_ratio),
        sum(|r| r.r_ratio),
        sum(|r| r.a_ratio),
    )
}

fn fill_row(row: &mut SweepRow, scenario: &ScenarioSpec, cell: &SweepCell, opts: &SweepOptions) -> Result<()> {
    let spec = ScenarioSpec::new(scenario.family.clone(), cell.seed);
    let e = generate(&spec, cell.horizon, cell.beta, cell.agents)?;
    row.n_beta = e.discount().n_beta();
    let eq = solve_equilibrium(&e, &opts.solve)?;
    row.residual_sup = Some(eq.residual_sup);
    row.iterations = Some(eq.iterations);
    let (q_min, q_max) = eq.price_ratio_band();
    row.q_min = Some(q_min);
    row.q_max = Some(q_max);

    let stab = equilibrium_stability(&e, &eq)?;
    row.max_sym_eig = Some(stab.max_sym_eig);
    row.negative_definite = Some(stab.negative_definite);
    row.index = Some(stab.index);

    let div = diversification_report(&e, &eq)?;
    row.a5 = Some(div.a5);
    row.a5_prime = Some(div.a5_prime);
    row.spectral_sum_sq = div.spectral_sum_sq;

    let reports = match opts.policy {
        DistortionPolicy::SeededRandom { draws } => (0..draws.max(1))
            .map(|k| rate_ratios(&e, &eq, &random_distortion(&e, &eq, draw_seed(cell.seed, k))?))
            .collect::<Result<Vec<_>>>()?,
        DistortionPolicy::OddEven => vec![rate_ratios(&e, &eq, &odd_even_distortion(&e, &eq)?)?],
    };
    let (s, m, r, a) = average(&reports);
    row.s_ratio = Some(s);
    row.m_ratio = Some(m);
    row.r_ratio = Some(r);
    row.a_ratio = Some(a);

    if opts.uniqueness_starts >= 2 {
        let probe = uniqueness_probe(&e, opts.uniqueness_starts, cell.seed, &opts.solve)?;
        row.clusters = Some(probe.clusters.len());
    }
    Ok(())
}

/// Runs a single cell; failures land in the status column.
pub fn run_cell(scenario: &ScenarioSpec, cell: &SweepCell, opts: &SweepOptions) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow::empty(scenario.family.name(), cell);
    row.status = match fill_row(&mut row, scenario, cell, opts) {
        Ok(()) => "ok".to_string(),
        Err(e) => e.to_string(),
    };
    row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    row
}

/// Trend of one `(beta, I, seed)` group ordered by `N_beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub family: String,
    pub beta: f64,
    pub agents: usize,
    pub seed: u64,
    pub n_beta: Vec<f64>,
    /// Least-squares slope of `log m_ratio` against `log N_beta`.
    pub m_ratio_slope: Option<f64>,
    pub m_ratio_strictly_decreasing: bool,
    pub s_ratio_min: Option<f64>,
    /// `s_ratio` at the smallest `N_beta`.
    pub s_ratio_first: Option<f64>,
    pub a5_first: Option<f64>,
    pub a5_last: Option<f64>,
    pub m_ratio_first: Option<f64>,
    pub m_ratio_last: Option<f64>,
}

pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 || pts.len() != x.len() {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn trends(rows: &[SweepRow]) -> Vec<TrendSummary> {
    let mut keys: Vec<SweepCellKey> = Vec::new();
    for r in rows {
        let key = SweepCellKey {
            beta: r.beta,
            agents: r.agents,
            seed: r.seed,
        };
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|key| {
            let mut group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.beta == key.beta && r.agents == key.agents && r.seed == key.seed)
                .collect();
            group.sort_by_key(|r| r.horizon);
            let all_ok = group.iter().all(|r| r.is_ok());
            let n_beta: Vec<f64> = group.iter().map(|r| r.n_beta).collect();
            let m: Vec<f64> = group.iter().map(|r| r.m_ratio.unwrap_or(f64::NAN)).collect();
            let s: Vec<f64> = group.iter().filter_map(|r| r.s_ratio).collect();
            TrendSummary {
                family: group[0].family.clone(),
                beta: key.beta,
                agents: key.agents,
                seed: key.seed,
                m_ratio_slope: if all_ok { log_log_slope(&n_beta, &m) } else { None },
                m_ratio_strictly_decreasing: all_ok && m.windows(2).all(|w| w[1] < w[0]),
                s_ratio_min: all_ok.then(|| s.iter().copied().fold(f64::INFINITY, f64::min)),
                s_ratio_first: group[0].s_ratio,
                a5_first: group[0].a5,
                a5_last: group[group.len() - 1].a5,
                m_ratio_first: group[0].m_ratio,
                m_ratio_last: group[group.len() - 1].m_ratio,
                n_beta,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub scenario: ScenarioSpec,
    pub options: SweepOptions,
    pub rows: Vec<SweepRow>,
    pub trends: Vec<TrendSummary>,
}

fn worker_count() -> Option<usize> {
    std::env::var("WORKERS").ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Runs every cell, concurrently when more than one worker is available,
/// and returns rows in cell order.
pub fn run_sweep(grid: &SweepGrid, opts: &SweepOptions) -> Result<SweepResult> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| LabError::validation("WORKERS", e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        grid.cells
            .par_iter()
            .map(|c| run_cell(&grid.scenario, c, opts))
            .collect()
    });
    let trends = trends(&rows);
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        scenario: grid.scenario.clone(),
        options: *opts,
        rows,
        trends,
    })
}

const COLUMNS: [&str; 23] = [
    "family",
    "horizon",
    "beta",
    "agents",
    "seed",
    "n_beta",
    "status",
    "residual_sup",
    "iterations",
    "max_sym_eig",
    "negative_definite",
    "index",
    "a5",
    "a5_prime",
    "spectral_sum_sq",
    "s_ratio",
    "m_ratio",
    "r_ratio",
    "a_ratio",
    "q_min",
    "q_max",
    "clusters",
    "wall_time_ms",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepResult {
    /// CSV with a leading `# schema` comment line; trend summaries follow
    /// as further comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# eqlab sweep schema v{} family={}",
            self.schema_version,
            self.scenario.family.name()
        )?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(COLUMNS)?;
            for r in &self.rows {
                w.write_record([
                    r.family.clone(),
                    r.horizon.to_string(),
                    r.beta.to_string(),
                    r.agents.to_string(),
                    r.seed.to_string(),
                    r.n_beta.to_string(),
                    r.status.clone(),
                    opt(r.residual_sup),
                    opt(r.iterations),
                    opt(r.max_sym_eig),
                    opt(r.negative_definite),
                    opt(r.index),
                    opt(r.a5),
                    opt(r.a5_prime),
                    opt(r.spectral_sum_sq),
                    opt(r.s_ratio),
                    opt(r.m_ratio),
                    opt(r.r_ratio),
                    opt(r.a_ratio),
                    opt(r.q_min),
                    opt(r.q_max),
                    opt(r.clusters),
                    format!("{:.3}", r.wall_time_ms),
                ])?;
            }
            w.flush()?;
        }
        for t in &self.trends {
            writeln!(
                out,
                "# trend beta={} agents={} seed={} m_ratio_slope={} strictly_decreasing={} s_ratio_min={}",
                t.beta,
                t.agents,
                t.seed,
                opt(t.m_ratio_slope),
                t.m_ratio_strictly_decreasing,
                opt(t.s_ratio_min),
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.7)).collect();
        assert!((log_log_slope(&x, &y).unwrap() + 0.7).abs() < 1e-12);
        assert!(log_log_slope(&x, &[1.0, 0.0, 1.0, 1.0]).is_none());
    }

    #[test]
    fn draw_seeds_are_distinct() {
        let seeds: Vec<u64> = (0..8).map(|k| draw_seed(5, k)).collect();
        for (a, s) in seeds.iter().enumerate() {
            assert!(!seeds[a + 1..].contains(s));
        }
    }
}
