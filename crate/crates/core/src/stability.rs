//! Local stability verdicts, equilibrium index, tâtonnement simulation and
//! multi-start uniqueness probing.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::aggregate_jacobian;
use crate::demand::check_prices;
use crate::economy::Economy;
use crate::equilibrium::{excess_demand, solve_from, start_points, EquilibriumResult, SolveOptions};
use crate::error::{LabError, Result};
use crate::ode::{integrate, Dopri5Options, Halt};

/// Relative threshold (against `|Dz|`) separating a negative verdict from an
/// inconclusive one.
pub const DEFINITENESS_TOL: f64 = 1e-10;
/// Two solves are the same equilibrium when their log-prices agree this well.
pub const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Largest eigenvalue of `(Dz + Dz') / 2`.
    pub max_sym_eig: f64,
    /// Full spectrum of the symmetric part, ascending.
    pub sym_eigenvalues: Vec<f64>,
    pub negative_definite: bool,
    /// Sign of `det(-Dz)`; 0 when numerically singular.
    pub index: i8,
    /// `log10 |det(-Dz)|`.
    pub det_sign_margin: f64,
    /// Ratio of extreme singular values.
    pub condition_estimate: f64,
    /// Spectral norm of `Dz`.
    pub jacobian_norm: f64,
    /// `max_sym_eig` is within tolerance of zero.
    pub inconclusive: bool,
}

pub fn stability_verdict(dz: &DMatrix<f64>) -> Result<StabilityReport> {
    if !dz.is_square() || dz.nrows() == 0 {
        return Err(LabError::validation(
            "jacobian",
            format!("expected a non-empty square matrix, got {}x{}", dz.nrows(), dz.ncols()),
        ));
    }
    let sym = (dz + dz.transpose()) * 0.5;
    let mut eigs: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    let max_sym_eig = *eigs.last().unwrap();

    let singular: Vec<f64> = dz.clone().svd(false, false).singular_values.iter().copied().collect();
    let s_max = singular.iter().copied().fold(0.0, f64::max);
    let s_min = singular.iter().copied().fold(f64::INFINITY, f64::min);
    let condition_estimate = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };

    let threshold = DEFINITENESS_TOL * s_max;
    let negative_definite = max_sym_eig < -threshold;

    let lu = (-dz).lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|k| u[(k, k)]).collect();
    let biggest = diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let degenerate = diag.iter().any(|v| v.abs() <= 1e-14 * biggest) || biggest == 0.0;
    let (index, det_sign_margin) = if degenerate {
        (0, f64::NEG_INFINITY)
    } else {
        let mut sign = lu.p().determinant::<f64>();
        let mut log_abs = 0.0;
        for v in &diag {
            sign *= v.signum();
            log_abs += v.abs().log10();
        }
        (if sign > 0.0 { 1 } else { -1 }, log_abs)
    };

    Ok(StabilityReport {
        max_sym_eig,
        sym_eigenvalues: eigs,
        negative_definite,
        index,
        det_sign_margin,
        condition_estimate,
        jacobian_norm: s_max,
        inconclusive: max_sym_eig.abs() <= threshold,
    })
}

pub fn equilibrium_stability(e: &Economy, eq: &EquilibriumResult) -> Result<StabilityReport> {
    stability_verdict(&aggregate_jacobian(e, eq)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TatonnementOptions {
    /// Integration horizon; `None` means `50 / |max_sym_eig|` when the
    /// equilibrium is stable and `1e3` otherwise.
    pub t_max: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    /// Keep every k-th accepted step.
    pub sample_every: usize,
    pub max_samples: usize,
    /// End the run once the distance to `p` is a tenth of the convergence
    /// radius; otherwise integrate to `t_max`.
    pub stop_when_converged: bool,
}

impl Default for TatonnementOptions {
    fn default() -> Self {
        Self {
            t_max: None,
            rtol: 1e-9,
            atol: 1e-14,
            sample_every: 1,
            max_samples: 10_000,
            stop_when_converged: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TatonnementRun {
    /// `(t, p(t))`, thinned uniformly to at most `max_samples` entries.
    pub trajectory: Vec<(f64, Vec<f64>)>,
    pub converged: bool,
    /// `|p(T) - p|_inf` against the Newton-solved equilibrium.
    pub final_distance: f64,
    /// `1e-6 |p|_inf`.
    pub threshold: f64,
    pub t_final: f64,
    pub steps: usize,
    pub rejected_steps: usize,
}

impl TatonnementRun {
    /// Distances `|p(t) - target|_inf` along the stored trajectory.
    pub fn distances(&self, target: &[f64]) -> Vec<f64> {
        self.trajectory.iter().map(|(_, p)| sup_distance(p, target)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.trajectory.first().map_or(0, |(_, p)| p.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|k| format!("p_{k}")));
        w.write_record(&header)?;
        for (t, p) in &self.trajectory {
            let mut row = vec![format!("{t:e}")];
            row.extend(p.iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

struct Sampler {
    every: usize,
    cap: usize,
    seen: usize,
    samples: Vec<(f64, Vec<f64>)>,
}

impl Sampler {
    fn push(&mut self, t: f64, p: &[f64]) {
        if self.seen.is_multiple_of(self.every) {
            self.samples.push((t, p.to_vec()));
            if self.samples.len() > self.cap {
                // Keep every other sample and double the stride.
                let kept = self.samples.drain(..).step_by(2).collect();
                self.samples = kept;
                self.every *= 2;
            }
        }
        self.seen += 1;
    }
}

/// Integrates `p' = z(p)` from `p0` and measures the distance to `eq.prices`.
pub fn tatonnement_simulate(
    e: &Economy,
    eq: &EquilibriumResult,
    p0: &[f64],
    opts: &TatonnementOptions,
) -> Result<TatonnementRun> {
    check_prices(p0, e.horizon())?;
    check_prices(&eq.prices, e.horizon())?;
    let t_max = match opts.t_max {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(LabError::validation("t_max", format!("must be positive, got {t}"))),
        None => {
            let report = equilibrium_stability(e, eq)?;
            if report.negative_definite {
                50.0 / report.max_sym_eig.abs()
            } else {
                1e3
            }
        }
    };
    let target = &eq.prices;
    let threshold = 1e-6 * sup_norm(target);
    let blow_up = 1e6 * sup_norm(p0);
    let mut sampler = Sampler {
        every: opts.sample_every.max(1),
        cap: opts.max_samples.max(2),
        seen: 0,
        samples: Vec::new(),
    };
    let mut diverged = None;
    let mut last = (0.0, p0.to_vec());
    let field = |p: &[f64]| {
        if p.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return None;
        }
        excess_demand(e, p).ok().map(|z| z.z)
    };
    let ode_opts = Dopri5Options {
        rtol: opts.rtol,
        atol: opts.atol,
        ..Default::default()
    };
    let run = integrate(field, p0, t_max, &ode_opts, |t, p| {
        sampler.push(t, p);
        last = (t, p.to_vec());
        let norm = sup_norm(p);
        if norm > blow_up {
            diverged = Some((t, norm));
            return false;
        }
        !(opts.stop_when_converged && sup_distance(p, target) <= 0.1 * threshold)
    })
    .ok_or(LabError::PriceCollapse { t: 0.0 })?;
    if let Some((t, norm)) = diverged {
        return Err(LabError::Divergence { t, norm });
    }
    if let Halt::StepUnderflow { t } = run.halt {
        return Err(LabError::PriceCollapse { t });
    }
    if sampler.samples.last().map(|(t, _)| *t) != Some(last.0) {
        sampler.samples.push(last);
    }
    let final_distance = sup_distance(&run.y, target);
    Ok(TatonnementRun {
        trajectory: sampler.samples,
        converged: final_distance <= threshold,
        final_distance,
        threshold,
        t_final: run.t,
        steps: run.accepted,
        rejected_steps: run.rejected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCluster {
    pub prices: Vec<f64>,
    /// Start indices that converged here.
    pub starts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessProbe {
    pub clusters: Vec<EquilibriumCluster>,
    /// `(start index, error message)` for starts that did not converge.
    pub failed_starts: Vec<(usize, String)>,
    /// Every converged start landed in a single cluster.
    pub agreement: bool,
}

fn same_equilibrium(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x.ln() - y.ln()).abs() < CLUSTER_TOL)
}

/// Solves from `starts` seeded points in parallel and clusters the results.
pub fn uniqueness_probe(e: &Economy, starts: usize, seed: u64, opts: &SolveOptions) -> Result<UniquenessProbe> {
    if starts < 2 {
        return Err(LabError::validation("starts", format!("need at least 2, got {starts}")));
    }
    let points = start_points(e, starts, seed);
    let results: Vec<Result<EquilibriumResult>> = points.par_iter().map(|p0| solve_from(e, p0, opts)).collect();
    let mut clusters: Vec<EquilibriumCluster> = Vec::new();
    let mut failed_starts = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(eq) => match clusters.iter_mut().find(|c| same_equilibrium(&c.prices, &eq.prices)) {
                Some(c) => c.starts.push(k),
                None => clusters.push(EquilibriumCluster {
                    prices: eq.prices,
                    starts: vec![k],
                }),
            },
            Err(err) => failed_starts.push((k, err.to_string())),
        }
    }
    Ok(UniquenessProbe {
        agreement: clusters.len() == 1,
        clusters,
        failed_starts,
    })
}
