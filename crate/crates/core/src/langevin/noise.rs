use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernels::MatrixFunction;
use crate::linalg::{self, CMatrix, DEFAULT_EIG_TOL};

/// One noise realisation, `n_steps + 1` samples of `n_channels` values.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    n_channels: usize,
    data: Vec<f64>,
}

impl NoisePath {
    /// Path from step-major samples.
    pub fn from_samples(n_channels: usize, data: Vec<f64>) -> Self {
        assert!(n_channels > 0 && data.len().is_multiple_of(n_channels));
        Self { n_channels, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_channels
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    /// All channels at step `j`.
    pub fn at(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_channels..(j + 1) * self.n_channels]
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.n_channels).copied().collect()
    }
}

/// Stationary real Gaussian noise with spectrum ν̃, generated lazily one
/// trajectory at a time by spectral synthesis.
///
/// Paths are periodic with period `period()` samples, at least twice the
/// path length, so no sample is correlated with its own wrap-around.
/// Trajectory `i` draws from its own ChaCha stream `(seed, i)`, which makes
/// every path independent of evaluation order.
#[derive(Clone)]
pub struct NoiseEnsemble {
    dt: f64,
    n_steps: usize,
    n_trajectories: usize,
    seed: u64,
    n_channels: usize,
    period: usize,
    /// Colouring factors `L_q` with `L_q L_q† = ν̃(ω_q)/(P·dt)` for
    /// `q = 0..=P/2`; real at both ends.
    factors: Vec<CMatrix>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for NoiseEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoiseEnsemble")
            .field("dt", &self.dt)
            .field("n_steps", &self.n_steps)
            .field("n_trajectories", &self.n_trajectories)
            .field("seed", &self.seed)
            .field("n_channels", &self.n_channels)
            .field("period", &self.period)
            .finish()
    }
}

fn coloring_factor(c: &CMatrix) -> CMatrix {
    let (values, vectors) = linalg::hermitian_eigen(c);
    let n = values.len();
    let mut root = vectors.clone();
    for (col, v) in values.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        for r in 0..n {
            root[(r, col)] *= s;
        }
    }
    root
}

/// Prepares an ensemble of `n_trajectories` paths of `n_steps + 1` samples
/// spaced by `dt` whose two-sided spectrum is `nu`.
///
/// Bin `ω_q = 2πq/(P·dt)` receives a complex Gaussian amplitude with
/// covariance `ν̃(ω_q)/(P·dt)`, conjugate-mirrored at `−ω_q`, so the lag
/// covariance of the samples is the Riemann sum of `(1/2π)∫ν̃(ω)e^{iωt}dω`
/// over the bins. ν̃ is interpolated linearly and taken as zero beyond the
/// grid; frequencies above the Nyquist limit `π/dt` are not represented.
pub fn generate_noise(
    nu: &MatrixFunction,
    dt: f64,
    n_steps: usize,
    n_trajectories: usize,
    seed: u64,
) -> Result<NoiseEnsemble> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if n_trajectories == 0 {
        return Err(Error::InvalidParameter("need at least one trajectory".into()));
    }
    nu.ensure_hermitian()?;
    let tol = DEFAULT_EIG_TOL * nu.max_norm();
    for (k, m) in nu.data().iter().enumerate() {
        let min_eigenvalue = linalg::min_eigenvalue(m);
        if min_eigenvalue < -tol {
            return Err(Error::SpectrumNotPositive {
                omega: nu.grid().omega(k),
                min_eigenvalue,
            });
        }
    }

    let period = (2 * (n_steps + 1)).next_power_of_two();
    let n = nu.n_channels();
    let norm = 1.0 / (period as f64 * dt);
    let omega_max = nu.grid().omega_max();
    let factors = (0..=period / 2)
        .map(|q| {
            let w = 2.0 * PI * q as f64 * norm;
            if w > omega_max {
                return Ok(CMatrix::zeros(n, n));
            }
            let c = nu.at(w)?.scale(norm);
            if q == 0 || q == period / 2 {
                Ok(coloring_factor(&c.map(|z| Complex64::new(z.re, 0.0))))
            } else {
                Ok(coloring_factor(&c))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let fft = FftPlanner::new().plan_fft_inverse(period);
    Ok(NoiseEnsemble {
        dt,
        n_steps,
        n_trajectories,
        seed,
        n_channels: n,
        period,
        factors,
        fft,
    })
}

impl NoiseEnsemble {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_trajectories(&self) -> usize {
        self.n_trajectories
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Bin frequencies `ω_q`, `q = 0..=P/2`.
    pub fn bin_frequencies(&self) -> Vec<f64> {
        (0..=self.period / 2)
            .map(|q| 2.0 * PI * q as f64 / (self.period as f64 * self.dt))
            .collect()
    }

    /// Trajectory `index`; the same index always yields the same path.
    pub fn path(&self, index: usize) -> NoisePath {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let n = self.n_channels;
        let p = self.period;
        let half = p / 2;
        let mut spectra = vec![vec![Complex64::new(0.0, 0.0); p]; n];
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        for q in 0..=half {
            let real_bin = q == 0 || q == half;
            for zi in z.iter_mut() {
                *zi = if real_bin {
                    Complex64::new(rng.sample(StandardNormal), 0.0)
                } else {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                };
            }
            let l = &self.factors[q];
            for (r, spectrum) in spectra.iter_mut().enumerate() {
                let c: Complex64 = (0..n).map(|col| l[(r, col)] * z[col]).sum();
                spectrum[q] = c;
                if !real_bin {
                    spectrum[p - q] = c.conj();
                }
            }
        }
        let len = self.n_steps + 1;
        let mut data = vec![0.0; len * n];
        for (ch, spectrum) in spectra.iter_mut().enumerate() {
            self.fft.process(spectrum);
            for j in 0..len {
                data[j * n + ch] = spectrum[j].re;
            }
        }
        NoisePath { n_channels: n, data }
    }

    /// Every path, generated in parallel.
    pub fn samples(&self) -> Vec<NoisePath> {
        (0..self.n_trajectories).into_par_iter().map(|i| self.path(i)).collect()
    }
}

/// Trajectory-averaged periodogram `(dt/L)|Σ_j ξ_j e^{−iωjdt}|²` of one
/// channel at the given frequencies, with `L` the path length.
///
/// Its expectation is ν̃ smoothed by the Fejér kernel of width `2π/(L·dt)`.
pub fn periodogram(noise: &NoiseEnsemble, channel: usize, omegas: &[f64]) -> Vec<f64> {
    let dt = noise.dt();
    let per_path: Vec<Vec<f64>> = (0..noise.n_trajectories())
        .into_par_iter()
        .map(|i| {
            let x = noise.path(i).channel(channel);
            let len = x.len() as f64;
            omegas
                .iter()
                .map(|w| {
                    let s: Complex64 = x
                        .iter()
                        .enumerate()
                        .map(|(j, v)| Complex64::from_polar(*v, -w * j as f64 * dt))
                        .sum();
                    s.norm_sqr() * dt / len
                })
                .collect()
        })
        .collect();
    let count = per_path.len() as f64;
    (0..omegas.len())
        .map(|k| per_path.iter().map(|p| p[k]).sum::<f64>() / count)
        .collect()
}
