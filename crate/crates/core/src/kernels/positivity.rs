use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{MatrixFunction, TimeKernel};
use crate::error::Result;
use crate::linalg;

/// Probes the time-domain positivity of a correlation kernel,
///
/// ```text
/// ∫∫ dτ₁ dτ₂ f†(τ₁) α(τ₁ − τ₂) f(τ₂) ≥ 0,
/// ```
///
/// over the window `[0, t_max]` with random smooth test functions.
///
/// Each trial draws complex white noise per channel, smooths it with a
/// three-point moving average, and evaluates the double integral by the
/// trapezoid rule. The returned value is the smallest quadratic form found,
/// normalised by `∫|f|²`; it should be non-negative up to rounding for a
/// physical kernel. Resolving the kernel finely enough for the quadrature
/// to mean anything is up to the caller.
pub fn posdef_quadratic_check(k: &TimeKernel, n_trials: usize, seed: u64) -> f64 {
    let half = k.half_len();
    let n_samples = half + 1;
    let channels = k.n_channels();
    let dt = k.dt();
    let weight = |i: usize| {
        if n_samples > 1 && (i == 0 || i == half) {
            0.5
        } else {
            1.0
        }
    };

    (0..n_trials.max(1))
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let white: Vec<Vec<Complex64>> = (0..n_samples)
                .map(|_| {
                    (0..channels)
                        .map(|_| {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            Complex64::new(re, im)
                        })
                        .collect()
                })
                .collect();
            let f: Vec<Vec<Complex64>> = (0..n_samples)
                .map(|i| {
                    let lo = i.saturating_sub(1);
                    let hi = (i + 1).min(n_samples - 1);
                    let count = (hi - lo + 1) as f64;
                    (0..channels)
                        .map(|c| (lo..=hi).map(|j| white[j][c]).sum::<Complex64>() / count)
                        .collect()
                })
                .collect();

            let mut form = Complex64::new(0.0, 0.0);
            for a in 0..n_samples {
                let mut row = Complex64::new(0.0, 0.0);
                for b in 0..n_samples {
                    let kernel = k.at_lag(a as i64 - b as i64);
                    let mut v = Complex64::new(0.0, 0.0);
                    for r in 0..channels {
                        for c in 0..channels {
                            v += f[a][r].conj() * kernel[(r, c)] * f[b][c];
                        }
                    }
                    row += v * weight(b);
                }
                form += row * weight(a);
            }
            let norm: f64 = (0..n_samples)
                .map(|a| weight(a) * f[a].iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum::<f64>()
                * dt;
            if norm > 0.0 {
                form.re * dt * dt / norm
            } else {
                0.0
            }
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of `f(ω)` over the grid.
pub fn posdef_spectral_check(f: &MatrixFunction) -> Result<f64> {
    f.ensure_hermitian()?;
    Ok(f.data()
        .par_iter()
        .map(linalg::min_eigenvalue)
        .reduce(|| f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::FrequencyGrid;
    use crate::linalg::{real_diagonal, CMatrix};

    #[test]
    fn zero_kernel_gives_zero() {
        let k = TimeKernel::from_fn(0.1, 2.0, |_| CMatrix::zeros(2, 2)).unwrap();
        assert_eq!(posdef_quadratic_check(&k, 5, 1), 0.0);
    }

    #[test]
    fn negative_exponential_kernel_is_caught() {
        let k = TimeKernel::from_fn(0.05, 3.0, |t| real_diagonal(2, -(-t.abs()).exp())).unwrap();
        assert!(posdef_quadratic_check(&k, 10, 7) < -1e-3);
    }

    #[test]
    fn positive_exponential_kernel_passes() {
        // e^{−|t|} has the positive spectrum 2/(1 + ω²).
        let k = TimeKernel::from_fn(0.05, 3.0, |t| real_diagonal(1, (-t.abs()).exp())).unwrap();
        assert!(posdef_quadratic_check(&k, 20, 3) > 0.0);
    }

    #[test]
    fn identity_function_has_unit_minimum() {
        let grid = FrequencyGrid::new(11, 1.0).unwrap();
        let f = MatrixFunction::from_fn(grid, 3, |_| real_diagonal(3, 1.0)).unwrap();
        assert!((posdef_spectral_check(&f).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trial_results_do_not_depend_on_scheduling() {
        let k = TimeKernel::from_fn(0.05, 2.0, |t| real_diagonal(1, (-t * t).exp())).unwrap();
        assert_eq!(posdef_quadratic_check(&k, 16, 42), posdef_quadratic_check(&k, 16, 42));
    }
}
