//! Fluctuation-dissipation inequality, FDR kernels and the
//! coupling-independence experiment for discrete environments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{discrete_correlation, random_couplings, thermal_kappa, DiscreteEnvironment};
use crate::error::{Error, Result};
use crate::kernels::{decompose, FrequencyGrid, KernelSet, MatrixFunction};
use crate::linalg::{self, CMatrix, DEFAULT_EIG_TOL};

/// Pointwise margins of an inequality check on a frequency grid.
///
/// For [`fdi_check`] the two margins are `λ_min(ν̃ − ωγ̃)` and
/// `λ_min(ν̃ + ωγ̃)`; for [`fdi_check_kappa`] both hold `λ_min(κ̃ − |ω|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FDIReport {
    pub omegas: Vec<f64>,
    pub margin_plus: Vec<f64>,
    pub margin_minus: Vec<f64>,
    pub worst_margin: f64,
    pub passed: bool,
    pub violating_frequencies: Vec<f64>,
    pub tolerance: f64,
}

impl FDIReport {
    fn from_margins(grid: &FrequencyGrid, plus: Vec<f64>, minus: Vec<f64>, tol: f64) -> Self {
        let omegas: Vec<f64> = grid.omegas().collect();
        let violating_frequencies = omegas
            .iter()
            .zip(plus.iter().zip(&minus))
            .filter(|(_, (p, m))| p.min(**m) < -tol)
            .map(|(w, _)| *w)
            .collect();
        let worst_margin = plus.iter().chain(&minus).cloned().fold(f64::INFINITY, f64::min);
        Self {
            omegas,
            margin_plus: plus,
            margin_minus: minus,
            worst_margin,
            passed: worst_margin >= -tol,
            violating_frequencies,
            tolerance: tol,
        }
    }

    /// Pointwise `min(m₊, m₋)`.
    pub fn margins(&self) -> Vec<f64> {
        self.margin_plus
            .iter()
            .zip(&self.margin_minus)
            .map(|(a, b)| a.min(*b))
            .collect()
    }
}

/// Checks `ν̃(ω) ⪰ ±ω γ̃(ω)` at every grid point.
pub fn fdi_check(k: &KernelSet, tol: f64) -> FDIReport {
    let grid = *k.grid();
    let (plus, minus): (Vec<f64>, Vec<f64>) = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let w = grid.omega(j);
            let nu = k.nu.get(j);
            let g = k.gamma.get(j).scale(w);
            (linalg::min_eigenvalue(&(nu - &g)), linalg::min_eigenvalue(&(nu + &g)))
        })
        .unzip();
    FDIReport::from_margins(&grid, plus, minus, tol)
}

/// Hermitian FDR kernel κ̃(ω) on a grid; a 1×1 matrix in the scalar case.
#[derive(Debug, Clone, PartialEq)]
pub struct FdrKernel {
    pub kappa: MatrixFunction,
}

impl FdrKernel {
    pub fn grid(&self) -> &FrequencyGrid {
        self.kappa.grid()
    }

    pub fn get(&self, k: usize) -> &CMatrix {
        self.kappa.get(k)
    }

    /// Real parts of a scalar kernel.
    pub fn scalar_values(&self) -> Vec<f64> {
        self.kappa.scalar_values().iter().map(|z| z.re).collect()
    }
}

/// `ω coth(ω/2T)` on the grid.
pub fn thermal_fdr_kernel(grid: &FrequencyGrid, temperature: f64) -> FdrKernel {
    FdrKernel {
        kappa: MatrixFunction::scalar(*grid, |w| thermal_kappa(w, temperature)),
    }
}

/// κ̃(ω) = ν̃(ω)/γ̃(ω) for a single channel.
pub fn fdr_kernel_scalar(k: &KernelSet) -> Result<FdrKernel> {
    if k.n_channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "scalar FDR kernel needs one channel, got {}",
            k.n_channels()
        )));
    }
    let floor = 1e-12 * k.gamma.max_norm();
    let grid = *k.grid();
    let mut data = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let g = k.gamma.get(j)[(0, 0)];
        if g.norm() <= floor {
            return Err(Error::DampingVanishes { omega: grid.omega(j) });
        }
        data.push(CMatrix::from_element(1, 1, k.nu.get(j)[(0, 0)] / g));
    }
    Ok(FdrKernel {
        kappa: MatrixFunction::new(grid, data)?,
    })
}

/// Solves `ν̃ = ½(κ̃γ̃ + γ̃κ̃)` for Hermitian κ̃ at every frequency.
///
/// Requires γ̃(ω) positive definite everywhere; eigenvalues at or below
/// `1e-9·max‖γ̃‖` are treated as vanishing.
pub fn fdr_kernel_matrix(k: &KernelSet) -> Result<FdrKernel> {
    let grid = *k.grid();
    let tol = DEFAULT_EIG_TOL * k.gamma.max_norm();
    let data = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            linalg::solve_symmetrized(k.gamma.get(j), k.nu.get(j), tol).map_err(|min_eigenvalue| Error::NotDamping {
                omega: grid.omega(j),
                min_eigenvalue,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FdrKernel {
        kappa: MatrixFunction::new(grid, data)?,
    })
}

/// Checks `κ̃(ω) ⪰ |ω|` at every grid point.
pub fn fdi_check_kappa(kappa: &FdrKernel, tol: f64) -> FDIReport {
    let grid = *kappa.grid();
    let margins: Vec<f64> = (0..grid.len())
        .map(|j| {
            let k = kappa.get(j);
            let shift = linalg::real_diagonal(k.nrows(), grid.omega(j).abs());
            linalg::min_eigenvalue(&(k - shift))
        })
        .collect();
    FDIReport::from_margins(&grid, margins.clone(), margins, tol)
}

/// Result of [`coupling_independence_test`], one entry per probed frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpread {
    pub omegas: Vec<f64>,
    /// Mean of the extracted κ̃ across coupling sets.
    pub kappa_mean: Vec<f64>,
    /// `(max − min)/|mean|` of κ̃ across coupling sets.
    pub spread: Vec<f64>,
}

impl CouplingSpread {
    pub fn max_spread(&self) -> f64 {
        self.spread.iter().cloned().fold(0.0, f64::max)
    }
}

/// Number of coupling channels drawn per random coupling set.
pub const INDEPENDENCE_CHANNELS: usize = 2;

/// Measures how much the scalar FDR kernel of a discrete environment
/// depends on its couplings.
///
/// For each of `n_random_couplings` random coupling sets (see
/// [`random_couplings`]) the broadened correlation is decomposed and
/// κ̃ = tr ν̃ / tr γ̃ is read off at grid points within `broadening` of a
/// positive populated transition frequency. Only a thermal population makes
/// the result independent of the couplings.
pub fn coupling_independence_test(
    levels: &[f64],
    probs: &[f64],
    broadening: f64,
    n_random_couplings: usize,
    seed: u64,
    grid: &FrequencyGrid,
) -> Result<CouplingSpread> {
    if n_random_couplings == 0 {
        return Err(Error::InvalidParameter("need at least one coupling set".into()));
    }
    let base = DiscreteEnvironment::new(
        levels.to_vec(),
        probs.to_vec(),
        random_couplings(levels.len(), INDEPENDENCE_CHANNELS, seed),
        broadening,
    )?;

    let mut lines: Vec<f64> = base
        .populated_transitions()
        .into_iter()
        .filter(|e| *e > broadening)
        .collect();
    lines.sort_by(f64::total_cmp);
    lines.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let indices: Vec<usize> = (0..grid.len())
        .filter(|&j| {
            let w = grid.omega(j);
            w > 0.0 && lines.iter().any(|e| (w - e).abs() <= broadening * (1.0 + 1e-9))
        })
        .collect();
    if indices.is_empty() {
        let omega = lines.first().copied().unwrap_or(0.0);
        return Err(Error::NoTransitionNearOmega { omega });
    }

    let samples: Vec<Vec<f64>> = (0..n_random_couplings as u64)
        .map(|trial| {
            let env = base.with_couplings(random_couplings(
                levels.len(),
                INDEPENDENCE_CHANNELS,
                seed.wrapping_add(trial),
            ))?;
            let k = decompose(&discrete_correlation(&env, grid)?)?;
            Ok(indices
                .iter()
                .map(|&j| (k.nu.get(j).trace() / k.gamma.get(j).trace()).re)
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut kappa_mean = Vec::with_capacity(indices.len());
    let mut spread = Vec::with_capacity(indices.len());
    for i in 0..indices.len() {
        let values = samples.iter().map(|s| s[i]);
        let lo = values.clone().fold(f64::INFINITY, f64::min);
        let hi = values.clone().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.sum::<f64>() / n_random_couplings as f64;
        kappa_mean.push(mean);
        spread.push((hi - lo) / mean.abs());
    }
    Ok(CouplingSpread {
        omegas: indices.iter().map(|&j| grid.omega(j)).collect(),
        kappa_mean,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{build_kernels, thermal_probabilities, Cutoff, EnvironmentState, SpectralModel};
    use num_complex::Complex64;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(401, 20.0).unwrap()
    }

    fn kernels(state: EnvironmentState) -> KernelSet {
        build_kernels(&SpectralModel::ohmic(0.3, Cutoff::Drude(8.0)), &state, &grid()).unwrap()
    }

    #[test]
    fn thermal_margin_matches_formula() {
        let k = kernels(EnvironmentState::Thermal { temperature: 1.0 });
        let report = fdi_check(&k, 1e-12);
        assert!(report.passed);
        for (j, w) in grid().omegas().enumerate() {
            let g = 0.3 / (1.0 + (w / 8.0).powi(2));
            let expected = g * (thermal_kappa(w, 1.0) - w.abs());
            assert!((report.margins()[j] - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn zero_temperature_saturates_and_classical_vacuum_violates() {
        let zero = fdi_check(&kernels(EnvironmentState::ZeroTemperature), 1e-12);
        assert!(zero.passed);
        assert!(zero.worst_margin.abs() < 1e-15);
        let vacuum = fdi_check(&kernels(EnvironmentState::Classical { temperature: 0.0 }), 1e-12);
        assert!(!vacuum.passed);
        assert_eq!(vacuum.violating_frequencies.len(), grid().len() - 1);
        assert!(!vacuum.violating_frequencies.contains(&0.0));
    }

    #[test]
    fn scalar_kernel_recovers_state() {
        let k = fdr_kernel_scalar(&kernels(EnvironmentState::Thermal { temperature: 0.4 })).unwrap();
        let oracle = thermal_fdr_kernel(&grid(), 0.4);
        for (a, b) in k.scalar_values().iter().zip(oracle.scalar_values()) {
            assert!((a - b).abs() <= 1e-13 * b.abs());
        }
        let flat = MatrixFunction::scalar(grid(), |_| 2.0);
        let unit = fdr_kernel_scalar(&KernelSet::from_nu_gamma(flat.clone(), flat).unwrap()).unwrap();
        assert!(unit.scalar_values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn vanishing_damping_is_reported() {
        let nu = MatrixFunction::scalar(grid(), |_| 1.0);
        let gamma = MatrixFunction::scalar(grid(), |w| if w.abs() > 10.0 { 0.0 } else { 1.0 });
        let k = KernelSet::from_nu_gamma(nu, gamma).unwrap();
        assert!(matches!(fdr_kernel_scalar(&k), Err(Error::DampingVanishes { .. })));
        assert!(matches!(fdr_kernel_matrix(&k), Err(Error::NotDamping { .. })));
    }

    #[test]
    fn matrix_kernel_reduces_to_scalar() {
        let k = kernels(EnvironmentState::Thermal { temperature: 2.0 });
        let a = fdr_kernel_scalar(&k).unwrap().scalar_values();
        let b = fdr_kernel_matrix(&k).unwrap().scalar_values();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-14 * x.abs());
        }
    }

    #[test]
    fn commuting_pair_gives_plain_ratio() {
        let g = linalg::real_diagonal(2, 1.0);
        let gamma = MatrixFunction::from_fn(grid(), 2, |_| {
            let mut m = g.clone();
            m[(1, 1)] = Complex64::new(4.0, 0.0);
            m
        })
        .unwrap();
        let nu = gamma.map(|_, m| m * m);
        let kappa = fdr_kernel_matrix(&KernelSet::from_nu_gamma(nu, gamma.clone()).unwrap()).unwrap();
        for (kk, gg) in kappa.kappa.data().iter().zip(gamma.data()) {
            assert!(linalg::norm(&(kk - gg)) < 1e-14);
        }
    }

    #[test]
    fn kappa_bound_checks() {
        let thermal = fdi_check_kappa(&thermal_fdr_kernel(&grid(), 0.5), 1e-12);
        assert!(thermal.passed);
        let zero = grid().zero_index();
        assert_eq!(thermal.margin_plus[zero], 1.0);
        let vac = fdr_kernel_scalar(&kernels(EnvironmentState::ZeroTemperature)).unwrap();
        assert!(fdi_check_kappa(&vac, 1e-12).margins().iter().all(|m| m.abs() < 1e-13));
        let classical = fdr_kernel_scalar(&kernels(EnvironmentState::Classical { temperature: 1.5 })).unwrap();
        let report = fdi_check_kappa(&classical, 1e-12);
        assert!(report.violating_frequencies.iter().all(|w| w.abs() > 3.0));
        assert!(report.violating_frequencies.iter().any(|w| (w - 3.1).abs() < 1e-9));
    }

    #[test]
    fn two_level_spread_vanishes_for_any_population() {
        let grid = FrequencyGrid::new(2001, 2.0).unwrap();
        let eta = 4.0 * grid.spacing();
        let result = coupling_independence_test(&[0.0, 1.0], &[0.8, 0.2], eta, 5, 3, &grid).unwrap();
        assert!(result.max_spread() < 1e-13);
        // κ̃(Ω) = Ω (p₀ + p₁)/(p₀ − p₁) at the line centre, times the
        // overlap factor of the mirrored line at distance 2Ω.
        let centre = result.omegas.iter().position(|w| (w - 1.0).abs() < 1e-12).unwrap();
        let lor = |x: f64| (eta / std::f64::consts::PI) / (x * x + eta * eta);
        let tails = (lor(0.0) + lor(2.0)) / (lor(0.0) - lor(2.0));
        assert!(
            (result.kappa_mean[centre] - tails / 0.6).abs() < 1e-12,
            "{}",
            result.kappa_mean[centre]
        );
    }

    #[test]
    fn unpopulated_environment_has_no_lines() {
        let grid = FrequencyGrid::new(201, 2.0).unwrap();
        let err = coupling_independence_test(&[0.5], &[1.0], 0.1, 3, 0, &grid).unwrap_err();
        assert!(matches!(err, Error::NoTransitionNearOmega { .. }));
    }

    #[test]
    fn thermal_kappa_is_insensitive_to_level_offset() {
        let grid = FrequencyGrid::new(3001, 3.0).unwrap();
        let eta = 4.0 * grid.spacing();
        let levels = [0.0, 1.0, 2.0];
        let shifted: Vec<f64> = levels.iter().map(|e| e + 0.37).collect();
        let a = coupling_independence_test(&levels, &thermal_probabilities(&levels, 1.0).unwrap(), eta, 4, 7, &grid)
            .unwrap();
        let b = coupling_independence_test(
            &shifted,
            &thermal_probabilities(&shifted, 1.0).unwrap(),
            eta,
            4,
            7,
            &grid,
        )
        .unwrap();
        assert_eq!(a.omegas, b.omegas);
        for (x, y) in a.kappa_mean.iter().zip(&b.kappa_mean) {
            assert!((x - y).abs() < 1e-10 * x.abs());
        }
    }
}
