//! Alignment of agents' marginal expenditure-share deviations.
//!
//! With `m_in` the equilibrium marginal shares and `m_n` their population
//! mean, `rho_in = (m_in - m_n) / m_n`. The headline statistic is
//! `a5 = (1/I^2) sum_{i,j} |<rho_i, rho_j>|`; its net-trade weighted variant
//! replaces the absolute value by `<t_i, t_j> <rho_i, rho_j>`.
//!
//! For log kernels the shares do not depend on the allocation, and
//! `a5^2 <= sum_k lambda_k^2` where `lambda_k` are the eigenvalues of
//! `D^(1/2) Sigma D^(1/2)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::demand::marginal_expenditure_shares;
use crate::economy::{beta_inner_product, DiscountStructure, Economy};
use crate::equilibrium::EquilibriumResult;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversificationReport {
    /// `shares[i][n-1] = m_in` at the equilibrium allocation.
    pub shares: Vec<Vec<f64>>,
    pub mean_shares: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    pub a5: f64,
    pub a5_prime: f64,
    /// `t_in = x_in - omega_in`, future dates only.
    pub net_trades: Vec<Vec<f64>>,
    /// Present only when every kernel is log.
    pub spectral_eigs: Option<Vec<f64>>,
    pub spectral_sum_sq: Option<f64>,
    /// `spectral_sum_sq - a5^2`.
    pub cs_gap: Option<f64>,
}

fn gram(rows: &[Vec<f64>], d: &DiscountStructure) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|a| rows.iter().map(|b| beta_inner_product(a, b, d)).collect())
        .collect()
}

/// `(1/I^2) sum |<rho_i, rho_j>|`.
pub fn alignment(rho: &[Vec<f64>], d: &DiscountStructure) -> Result<f64> {
    let count = rho.len() as f64;
    let g = gram(rho, d)?;
    Ok(g.iter().flatten().map(|v| v.abs()).sum::<f64>() / (count * count))
}

fn relative_deviations(shares: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let count = shares.len() as f64;
    let n = shares.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..n)
        .map(|m| shares.iter().map(|r| r[m]).sum::<f64>() / count)
        .collect();
    if let Some(m) = mean.iter().position(|v| !(*v > 0.0)) {
        return Err(LabError::ZeroMeanShare { date: m + 1 });
    }
    let rho = shares
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(s, m)| (s - m) / m).collect())
        .collect();
    Ok((mean, rho))
}

pub fn diversification_report(e: &Economy, eq: &EquilibriumResult) -> Result<DiversificationReport> {
    let d = e.discount();
    if eq.allocation.len() != e.agent_count() {
        return Err(LabError::LengthMismatch {
            expected: e.agent_count(),
            got: eq.allocation.len(),
        });
    }
    let shares = e
        .agents()
        .iter()
        .zip(&eq.allocation)
        .map(|(a, x)| {
            if x.len() != e.horizon() + 1 {
                return Err(LabError::LengthMismatch {
                    expected: e.horizon() + 1,
                    got: x.len(),
                });
            }
            marginal_expenditure_shares(&a.kernel, d, &x[1..])
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean_shares, rho) = relative_deviations(&shares)?;
    let net_trades: Vec<Vec<f64>> = e
        .agents()
        .iter()
        .zip(&eq.allocation)
        .map(|(a, x)| x[1..].iter().zip(&a.endowment[1..]).map(|(x, w)| x - w).collect())
        .collect();

    let count = e.agent_count() as f64;
    let g_rho = gram(&rho, d)?;
    let g_t = gram(&net_trades, d)?;
    let a5 = g_rho.iter().flatten().map(|v| v.abs()).sum::<f64>() / (count * count);
    let a5_prime = g_rho
        .iter()
        .flatten()
        .zip(g_t.iter().flatten())
        .map(|(r, t)| r * t)
        .sum::<f64>()
        / (count * count);

    let (spectral_eigs, spectral_sum_sq, cs_gap) = if e.all_log() {
        let (eigs, sum_sq) = economy_spectral_statistic(e)?;
        (Some(eigs), Some(sum_sq), Some(sum_sq - a5 * a5))
    } else {
        (None, None, None)
    };

    Ok(DiversificationReport {
        shares,
        mean_shares,
        rho,
        a5,
        a5_prime,
        net_trades,
        spectral_eigs,
        spectral_sum_sq,
        cs_gap,
    })
}

/// Taste-deviation profiles `tau_in / tau_n - 1` after normalizing each row
/// of future tastes so that `sum_n beta^n tau_in = 1`.
pub fn taste_deviations(future_tastes: &[Vec<f64>], d: &DiscountStructure) -> Result<Vec<Vec<f64>>> {
    let n = d.horizon();
    let mut normalized = Vec::with_capacity(future_tastes.len());
    for (i, row) in future_tastes.iter().enumerate() {
        if row.len() != n {
            return Err(LabError::validation(
                format!("taste[{i}]"),
                format!("expected {n} future entries"),
            ));
        }
        let total: f64 = row.iter().zip(&d.powers()[1..]).map(|(t, b)| t * b).sum();
        if !(total > 0.0) {
            return Err(LabError::NonPositiveInput {
                what: "discounted taste mass",
                value: total,
            });
        }
        normalized.push(row.iter().map(|t| t / total).collect::<Vec<f64>>());
    }
    Ok(relative_deviations(&normalized)?.1)
}

/// Eigenvalues (ascending) of `D^(1/2) Sigma D^(1/2)` and their sum of
/// squares, from future taste rows `tau_i1..tau_iN` of log agents.
pub fn spectral_statistic(future_tastes: &[Vec<f64>], d: &DiscountStructure) -> Result<(Vec<f64>, f64)> {
    if future_tastes.is_empty() {
        return Err(LabError::validation("taste", "needs at least one agent"));
    }
    let rho = taste_deviations(future_tastes, d)?;
    let n = d.horizon();
    let count = rho.len() as f64;
    let root: Vec<f64> = d.weights().iter().map(|w| w.sqrt()).collect();
    let k = DMatrix::from_fn(n, n, |m, l| {
        root[m] * root[l] * rho.iter().map(|r| r[m] * r[l]).sum::<f64>() / count
    });
    let mut eigs: Vec<f64> = k.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    let sum_sq = eigs.iter().map(|v| v * v).sum();
    Ok((eigs, sum_sq))
}

pub fn economy_spectral_statistic(e: &Economy) -> Result<(Vec<f64>, f64)> {
    if !e.all_log() {
        return Err(LabError::NonLogKernel);
    }
    let rows: Vec<Vec<f64>> = e.agents().iter().map(|a| a.kernel.taste()[1..].to_vec()).collect();
    spectral_statistic(&rows, e.discount())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_have_zero_spectrum() {
        let d = DiscountStructure::new(0.9, 5).unwrap();
        let rows = vec![vec![1.0, 2.0, 0.5, 1.0, 1.0]; 4];
        let (eigs, sum_sq) = spectral_statistic(&rows, &d).unwrap();
        assert!(eigs.iter().all(|v| v.abs() < 1e-15));
        assert!(sum_sq < 1e-30);
    }

    #[test]
    fn rank_one_profiles_have_one_eigenvalue() {
        let d = DiscountStructure::new(0.8, 6).unwrap();
        // Two mirrored types around a common baseline: rho_i = +/- c * dir.
        let dir = [0.3, -0.2, 0.1, 0.25, -0.4, 0.05];
        let rows: Vec<Vec<f64>> = [1.0, -1.0, 1.0, -1.0]
            .iter()
            .map(|s| dir.iter().map(|v| 1.0 + s * v).collect())
            .collect();
        let (eigs, _) = spectral_statistic(&rows, &d).unwrap();
        let big = eigs.iter().filter(|v| v.abs() > 1e-12).count();
        assert_eq!(big, 1, "{eigs:?}");
    }

    #[test]
    fn normalization_is_scale_free() {
        let d = DiscountStructure::new(0.7, 3).unwrap();
        let a = vec![vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 1.0]];
        let b = vec![vec![5.0, 10.0, 15.0], vec![0.3, 0.1, 0.1]];
        let (ea, _) = spectral_statistic(&a, &d).unwrap();
        let (eb, _) = spectral_statistic(&b, &d).unwrap();
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
