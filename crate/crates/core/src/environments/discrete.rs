use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{FrequencyGrid, MatrixFunction};
use crate::linalg::{self, CMatrix};

/// Finite environment with stationary populations and per-channel coupling
/// operators given by their matrix elements in the energy basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEnvironment {
    levels: Vec<f64>,
    probs: Vec<f64>,
    couplings: Vec<CMatrix>,
    broadening: f64,
}

impl DiscreteEnvironment {
    pub fn new(levels: Vec<f64>, probs: Vec<f64>, couplings: Vec<CMatrix>, broadening: f64) -> Result<Self> {
        let n = levels.len();
        let bad = |msg: String| Err(Error::InvalidEnvironment(msg));
        if n == 0 {
            return bad("at least one level is required".into());
        }
        if probs.len() != n {
            return bad(format!("{} probabilities for {n} levels", probs.len()));
        }
        if levels.iter().any(|e| !e.is_finite()) {
            return bad("level energies must be finite".into());
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("probabilities must be non-negative".into());
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("probabilities sum to {total}, not 1"));
        }
        if couplings.is_empty() {
            return bad("at least one coupling channel is required".into());
        }
        for (c, l) in couplings.iter().enumerate() {
            if l.nrows() != n || l.ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "coupling {c} is {}x{}, expected {n}x{n}",
                    l.nrows(),
                    l.ncols()
                )));
            }
            if linalg::hermitian_deviation(l) > 1e-12 * linalg::norm(l).max(1.0) {
                return bad(format!("coupling {c} is not Hermitian"));
            }
        }
        if !(broadening.is_finite() && broadening > 0.0) {
            return bad(format!("broadening must be positive, got {broadening}"));
        }
        Ok(Self {
            levels,
            probs,
            couplings,
            broadening,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn couplings(&self) -> &[CMatrix] {
        &self.couplings
    }

    pub fn broadening(&self) -> f64 {
        self.broadening
    }

    pub fn n_channels(&self) -> usize {
        self.couplings.len()
    }

    pub fn with_couplings(&self, couplings: Vec<CMatrix>) -> Result<Self> {
        Self::new(self.levels.clone(), self.probs.clone(), couplings, self.broadening)
    }

    /// Transition frequencies `ε_i − ε_j` for pairs with `p_i + p_j > 0`.
    pub fn populated_transitions(&self) -> Vec<f64> {
        let n = self.levels.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.probs[i] + self.probs[j] > 0.0 {
                    out.push(self.levels[i] - self.levels[j]);
                }
            }
        }
        out
    }
}

/// Normalised Boltzmann weights `p_i ∝ e^{−ε_i/T}`; `T < 0` inverts them.
pub fn thermal_probabilities(levels: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature.is_finite() && temperature != 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be finite and nonzero, got {temperature}"
        )));
    }
    if levels.is_empty() {
        return Err(Error::InvalidEnvironment("at least one level is required".into()));
    }
    let reference = if temperature > 0.0 {
        levels.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    let weights: Vec<f64> = levels.iter().map(|e| (-(e - reference) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Random Hermitian coupling operators with vanishing diagonal and
/// independent standard complex normal entries above it.
pub fn random_couplings(n_levels: usize, n_channels: usize, seed: u64) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_channels)
        .map(|_| {
            let mut l = CMatrix::zeros(n_levels, n_levels);
            for i in 0..n_levels {
                for j in (i + 1)..n_levels {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let z = Complex64::new(re, im) / 2f64.sqrt();
                    l[(i, j)] = z;
                    l[(j, i)] = z.conj();
                }
            }
            l
        })
        .collect()
}

fn lorentzian(x: f64, eta: f64) -> f64 {
    (eta / PI) / (x * x + eta * eta)
}

/// Correlation spectrum of a discrete environment,
///
/// ```text
/// α̃_nm(ω) = 2π Σ_ij p_i ⟨i|l_n|j⟩ ⟨i|l_m|j⟩* δ_η(ω − (ε_i − ε_j)),
/// ```
///
/// with each line broadened into a unit-area Lorentzian of half-width η.
pub fn discrete_correlation(env: &DiscreteEnvironment, grid: &FrequencyGrid) -> Result<MatrixFunction> {
    let eta = env.broadening;
    if eta < 2.0 * grid.spacing() {
        return Err(Error::BroadeningTooNarrow {
            eta,
            spacing: grid.spacing(),
        });
    }
    let n = env.levels.len();
    let channels = env.n_channels();
    let mut lines: Vec<(f64, CMatrix)> = Vec::new();
    for i in 0..n {
        if env.probs[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            let w = CMatrix::from_fn(channels, channels, |a, b| {
                env.couplings[a][(i, j)] * env.couplings[b][(i, j)].conj() * (2.0 * PI * env.probs[i])
            });
            if w.iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
                lines.push((env.levels[i] - env.levels[j], w));
            }
        }
    }
    let data: Vec<CMatrix> = grid
        .omegas()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|w| {
            let mut acc = CMatrix::zeros(channels, channels);
            for (e, weight) in &lines {
                let l = lorentzian(w - e, eta);
                for (a, b) in acc.iter_mut().zip(weight.iter()) {
                    *a += b * l;
                }
            }
            acc
        })
        .collect();
    MatrixFunction::new(*grid, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{classify, Classification};
    use crate::kernels::{decompose, posdef_spectral_check};

    fn off_diagonal(z: Complex64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[Complex64::new(0.0, 0.0), z, z.conj(), Complex64::new(0.0, 0.0)])
    }

    #[test]
    fn single_level_gives_zero_frequency_line() {
        let grid = FrequencyGrid::new(201, 5.0).unwrap();
        let l = CMatrix::from_element(1, 1, Complex64::new(0.7, 0.0));
        let env = DiscreteEnvironment::new(vec![1.3], vec![1.0], vec![l], 0.2).unwrap();
        let a = discrete_correlation(&env, &grid).unwrap();
        for (k, w) in grid.omegas().enumerate() {
            let expected = 2.0 * PI * 0.49 * lorentzian(w, 0.2);
            assert!((a.get(k)[(0, 0)].re - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn two_level_line_ratio_is_boltzmann() {
        let (big_omega, t) = (2.0, 0.8);
        let grid = FrequencyGrid::new(801, 4.0).unwrap();
        let probs = thermal_probabilities(&[0.0, big_omega], t).unwrap();
        let eta = 4.0 * grid.spacing();
        let env = DiscreteEnvironment::new(
            vec![0.0, big_omega],
            probs.clone(),
            vec![off_diagonal(Complex64::new(0.6, 0.8))],
            eta,
        )
        .unwrap();
        let a = discrete_correlation(&env, &grid).unwrap();
        // Two lines only: p₀|l|² at −Ω and p₁|l|² at +Ω.
        let oracle =
            |w: f64| 2.0 * PI * (probs[0] * lorentzian(w + big_omega, eta) + probs[1] * lorentzian(w - big_omega, eta));
        for (k, w) in grid.omegas().enumerate() {
            assert!((a.get(k)[(0, 0)].re - oracle(w)).abs() < 1e-12);
        }
        let (minus, _) = grid.locate(-big_omega).unwrap();
        let (plus, _) = grid.locate(big_omega).unwrap();
        assert!(a.get(minus)[(0, 0)].re > a.get(plus)[(0, 0)].re);
        let k = decompose(&a).unwrap();
        assert_eq!(classify(&k), Classification::Damping);

        let inverted = DiscreteEnvironment::new(
            vec![0.0, big_omega],
            vec![probs[1], probs[0]],
            vec![off_diagonal(Complex64::new(0.6, 0.8))],
            eta,
        )
        .unwrap();
        let b = discrete_correlation(&inverted, &grid).unwrap();
        assert!(b.get(minus)[(0, 0)].re < b.get(plus)[(0, 0)].re);
        assert_eq!(classify(&decompose(&b).unwrap()), Classification::Amplifying);
    }

    #[test]
    fn narrow_broadening_is_rejected() {
        let grid = FrequencyGrid::new(101, 5.0).unwrap();
        let env = DiscreteEnvironment::new(vec![0.0, 1.0], vec![0.5, 0.5], random_couplings(2, 1, 3), 0.05).unwrap();
        assert!(matches!(
            discrete_correlation(&env, &grid),
            Err(Error::BroadeningTooNarrow { .. })
        ));
    }

    #[test]
    fn correlation_is_positive_semidefinite() {
        let grid = FrequencyGrid::new(601, 6.0).unwrap();
        let levels = vec![0.0, 0.7, 1.9, 2.6];
        let probs = thermal_probabilities(&levels, 1.1).unwrap();
        let env = DiscreteEnvironment::new(levels, probs, random_couplings(4, 3, 11), 4.0 * grid.spacing()).unwrap();
        let a = discrete_correlation(&env, &grid).unwrap();
        assert!(posdef_spectral_check(&a).unwrap() >= -1e-12 * a.max_norm());
    }

    #[test]
    fn invalid_environments_are_rejected() {
        let l = random_couplings(2, 1, 0);
        assert!(DiscreteEnvironment::new(vec![0.0, 1.0], vec![0.6, 0.6], l.clone(), 0.1).is_err());
        assert!(DiscreteEnvironment::new(vec![0.0, 1.0], vec![1.0, 0.0], l.clone(), 0.0).is_err());
        let mut skew = l[0].clone();
        skew[(0, 1)] += Complex64::new(0.1, 0.0);
        assert!(DiscreteEnvironment::new(vec![0.0, 1.0], vec![1.0, 0.0], vec![skew], 0.1).is_err());
        assert!(DiscreteEnvironment::new(vec![0.0, 1.0], vec![1.0, 0.0], random_couplings(3, 1, 0), 0.1).is_err());
    }

    #[test]
    fn thermal_probabilities_normalise_and_invert() {
        let p = thermal_probabilities(&[0.0, 1.0, 2.0], 1.0).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] / p[1] - 1f64.exp()).abs() < 1e-12);
        let q = thermal_probabilities(&[0.0, 1.0, 2.0], -1.0).unwrap();
        assert!(q[2] > q[1] && q[1] > q[0]);
    }

    #[test]
    fn random_couplings_are_hermitian_and_seeded() {
        let a = random_couplings(4, 2, 9);
        assert_eq!(a, random_couplings(4, 2, 9));
        assert_ne!(a, random_couplings(4, 2, 10));
        for l in &a {
            assert_eq!(linalg::hermitian_deviation(l), 0.0);
            assert!((0..4).all(|i| l[(i, i)] == Complex64::new(0.0, 0.0)));
        }
    }
}
