//! Environment models: damping spectra, statistical states, microscopic
//! discrete environments and the damping/amplifying classification.

mod discrete;
mod spectral;
mod state;

pub use discrete::{discrete_correlation, random_couplings, thermal_probabilities, DiscreteEnvironment};
pub use spectral::{Cutoff, SpectralFamily, SpectralModel};
pub use state::{thermal_kappa, EnvironmentState, KappaFn, Table};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{FrequencyGrid, KernelSet, MatrixFunction};
use crate::linalg::{self, CMatrix, DEFAULT_EIG_TOL};

/// Damping profile sampled on the grid. Spectra that diverge at ω = 0
/// (sub-ohmic) take the value at the first nonzero grid frequency there.
fn sampled_profile(model: &SpectralModel, grid: &FrequencyGrid) -> Vec<f64> {
    grid.omegas()
        .map(|w| {
            let g = model.eval(w);
            if g.is_finite() {
                g
            } else {
                model.eval(grid.spacing())
            }
        })
        .collect()
}

/// Single-channel kernels from a damping spectrum and an environment state:
/// ν̃ = κ̃γ̃, μ̃ = iωγ̃, α̃ = ν̃ − ωγ̃.
pub fn build_kernels(model: &SpectralModel, state: &EnvironmentState, grid: &FrequencyGrid) -> Result<KernelSet> {
    model.validate()?;
    state.validate()?;
    let profile = sampled_profile(model, grid);
    let gamma = MatrixFunction::new(*grid, profile.iter().map(|&g| linalg::scalar(g)).collect())?;
    let nu = MatrixFunction::new(
        *grid,
        grid.omegas()
            .zip(&profile)
            .map(|(w, &g)| linalg::scalar(state.kappa(w) * g))
            .collect(),
    )?;
    KernelSet::from_nu_gamma(nu, gamma)
}

/// Multichannel kernels with cross-correlations:
/// `γ̃_nm(ω) = M_nm √(g_n(ω) g_m(ω))`, `ν̃ = κ̃ γ̃`.
///
/// `models` holds one profile per channel, or a single profile shared by all.
/// The congruence with `diag(√g)` keeps γ̃ positive semidefinite whenever the
/// mixing matrix `M` is.
pub fn build_multichannel(
    models: &[SpectralModel],
    state: &EnvironmentState,
    mixing: &CMatrix,
    grid: &FrequencyGrid,
) -> Result<KernelSet> {
    let n = mixing.nrows();
    if n == 0 || mixing.ncols() != n {
        return Err(Error::ShapeMismatch("mixing matrix must be square".into()));
    }
    if models.len() != 1 && models.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} spectral models for {n} channels",
            models.len()
        )));
    }
    let scale = linalg::norm(mixing).max(1.0);
    if linalg::hermitian_deviation(mixing) > DEFAULT_EIG_TOL * scale {
        return Err(Error::MixingNotPositive {
            min_eigenvalue: f64::NAN,
        });
    }
    let min_eigenvalue = linalg::min_eigenvalue(mixing);
    if min_eigenvalue < -DEFAULT_EIG_TOL * scale {
        return Err(Error::MixingNotPositive { min_eigenvalue });
    }
    state.validate()?;
    let profiles: Vec<Vec<f64>> = models
        .iter()
        .map(|m| m.validate().map(|_| sampled_profile(m, grid)))
        .collect::<Result<_>>()?;
    let profile = |ch: usize, k: usize| profiles[if profiles.len() == 1 { 0 } else { ch }][k];

    let mut gamma = Vec::with_capacity(grid.len());
    let mut nu = Vec::with_capacity(grid.len());
    for (k, w) in grid.omegas().enumerate() {
        let g = CMatrix::from_fn(n, n, |r, c| mixing[(r, c)] * (profile(r, k) * profile(c, k)).sqrt());
        nu.push(g.scale(state.kappa(w)));
        gamma.push(g);
    }
    KernelSet::from_nu_gamma(MatrixFunction::new(*grid, nu)?, MatrixFunction::new(*grid, gamma)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Damping,
    Amplifying,
    Indefinite,
}

/// Classifies with the default tolerance, `1e-9` times the largest norm of γ̃.
pub fn classify(k: &KernelSet) -> Classification {
    classify_with_tol(k, DEFAULT_EIG_TOL * k.gamma.max_norm())
}

/// Damping if every eigenvalue of γ̃(ω) exceeds `tol` on the whole grid,
/// amplifying if every eigenvalue is below `−tol`, indefinite otherwise.
pub fn classify_with_tol(k: &KernelSet, tol: f64) -> Classification {
    let (lo, hi) = k
        .gamma
        .data()
        .iter()
        .map(|g| {
            let values = linalg::hermitian_eigenvalues(g);
            (values[0], values[values.len() - 1])
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
            (lo.min(a), hi.max(b))
        });
    if lo > tol {
        Classification::Damping
    } else if hi < -tol {
        Classification::Amplifying
    } else {
        Classification::Indefinite
    }
}

/// Pointwise κ̃(ω) of a state on a grid, as a real profile.
pub fn kappa_profile(state: &EnvironmentState, grid: &FrequencyGrid) -> Vec<f64> {
    grid.omegas().map(|w| state.kappa(w)).collect()
}

#[cfg(test)]
pub(crate) fn complex(re: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(re, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::posdef_spectral_check;
    use num_complex::Complex64;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(401, 20.0).unwrap()
    }

    #[test]
    fn thermal_ohmic_noise_kernel() {
        let model = SpectralModel::ohmic(0.2, Cutoff::None);
        let t = 0.7;
        let k = build_kernels(&model, &EnvironmentState::Thermal { temperature: t }, &grid()).unwrap();
        for (j, w) in grid().omegas().enumerate() {
            let expected = if w == 0.0 {
                0.2 * 2.0 * t
            } else {
                0.2 * w / (w / (2.0 * t)).tanh()
            };
            let got = k.nu.get(j)[(0, 0)];
            assert!((got.re - expected).abs() <= 1e-14 * expected.abs().max(1.0));
            assert_eq!(got.im, 0.0);
        }
    }

    #[test]
    fn unsqueezed_state_equals_thermal() {
        let model = SpectralModel::ohmic(0.2, Cutoff::Drude(5.0));
        let thermal = build_kernels(&model, &EnvironmentState::Thermal { temperature: 1.3 }, &grid()).unwrap();
        let squeezed = build_kernels(
            &model,
            &EnvironmentState::Squeezed {
                temperature: 1.3,
                squeezing: Table::constant(0.0),
            },
            &grid(),
        )
        .unwrap();
        assert_eq!(thermal, squeezed);
    }

    #[test]
    fn classical_vacuum_has_no_noise_but_damps() {
        let model = SpectralModel::ohmic(0.4, Cutoff::None);
        let k = build_kernels(&model, &EnvironmentState::Classical { temperature: 0.0 }, &grid()).unwrap();
        assert_eq!(k.nu.max_norm(), 0.0);
        assert!(k.gamma.data().iter().all(|g| g[(0, 0)].re == 0.4));
        assert_eq!(classify(&k), Classification::Damping);
    }

    #[test]
    fn mu_is_i_omega_gamma() {
        let model = SpectralModel::ohmic(0.3, Cutoff::Exponential(4.0));
        let k = build_kernels(&model, &EnvironmentState::Thermal { temperature: 1.0 }, &grid()).unwrap();
        for (j, w) in grid().omegas().enumerate() {
            let expected = Complex64::new(0.0, w) * k.gamma.get(j)[(0, 0)];
            assert!((k.mu.get(j)[(0, 0)] - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn identity_mixing_gives_independent_channels() {
        let model = SpectralModel::ohmic(0.5, Cutoff::Drude(3.0));
        let state = EnvironmentState::Thermal { temperature: 0.5 };
        let single = build_kernels(&model, &state, &grid()).unwrap();
        let multi = build_multichannel(&[model], &state, &linalg::real_diagonal(2, 1.0), &grid()).unwrap();
        for j in 0..grid().len() {
            let g = multi.gamma.get(j);
            assert_eq!(g[(0, 0)], single.gamma.get(j)[(0, 0)]);
            assert_eq!(g[(1, 1)], single.gamma.get(j)[(0, 0)]);
            assert_eq!(g[(0, 1)], complex(0.0));
            assert_eq!(multi.nu.get(j)[(1, 1)], single.nu.get(j)[(0, 0)]);
        }
    }

    #[test]
    fn all_ones_mixing_is_rank_one() {
        let models = [
            SpectralModel::ohmic(0.5, Cutoff::Drude(3.0)),
            SpectralModel::ohmic(0.2, Cutoff::Drude(6.0)),
        ];
        let mixing = CMatrix::from_element(2, 2, complex(1.0));
        let k = build_multichannel(&models, &EnvironmentState::ZeroTemperature, &mixing, &grid()).unwrap();
        for g in k.gamma.data() {
            let values = linalg::hermitian_eigenvalues(g);
            assert!(values[0].abs() <= 1e-12 * values[1].abs().max(1e-300));
            assert!(values[1] > 0.0);
        }
    }

    #[test]
    fn indefinite_mixing_is_rejected() {
        let mixing = CMatrix::from_row_slice(2, 2, &[complex(1.0), complex(2.0), complex(2.0), complex(1.0)]);
        let err = build_multichannel(
            &[SpectralModel::ohmic(1.0, Cutoff::None)],
            &EnvironmentState::ZeroTemperature,
            &mixing,
            &grid(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MixingNotPositive { .. }));
    }

    #[test]
    fn positive_mixing_keeps_noise_positive() {
        let mixing = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.3, 0.4),
                Complex64::new(0.3, -0.4),
                Complex64::new(1.0, 0.0),
            ],
        );
        let k = build_multichannel(
            &[SpectralModel::ohmic(1.0, Cutoff::Drude(2.0))],
            &EnvironmentState::Thermal { temperature: 0.3 },
            &mixing,
            &grid(),
        )
        .unwrap();
        assert!(posdef_spectral_check(&k.nu).unwrap() >= 0.0);
    }

    #[test]
    fn classification_follows_the_sign_of_damping() {
        let model = SpectralModel::ohmic(0.5, Cutoff::Drude(3.0));
        let k = build_kernels(&model, &EnvironmentState::Thermal { temperature: 1.0 }, &grid()).unwrap();
        assert_eq!(classify(&k), Classification::Damping);
        assert_eq!(classify(&k.with_negated_damping().unwrap()), Classification::Amplifying);

        let nu = MatrixFunction::scalar(grid(), |w| w.abs() + 1.0);
        let gamma = MatrixFunction::scalar(grid(), |w| (w / 4.0).cos());
        let mixed = KernelSet::from_nu_gamma(nu, gamma).unwrap();
        assert_eq!(classify(&mixed), Classification::Indefinite);
    }
}
