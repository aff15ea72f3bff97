//! Stationary matrix correlation kernels in frequency and time.
//!
//! Fourier convention throughout the crate:
//!
//! ```text
//! α̃(ω) = ∫ dτ e^{−iωτ} α(τ),      α(t) = (1/2π) ∫ dω e^{+iωt} α̃(ω)
//! ```
//!
//! A complex correlation α̃ splits into the noise kernel ν̃, the dissipation
//! kernel μ̃ and the damping kernel γ̃:
//!
//! ```text
//! ν̃(ω) = ½[α̃(ω) + α̃ᵀ(−ω)]
//! μ̃(ω) = (1/2i)[α̃(ω) − α̃ᵀ(−ω)] = iω γ̃(ω)
//! α̃(ω) = ν̃(ω) − ω γ̃(ω)
//! ```

mod fourier;
mod positivity;

pub use fourier::{chirp_transform, to_frequency, to_time};
pub use positivity::{posdef_quadratic_check, posdef_spectral_check};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, DEFAULT_EIG_TOL};

/// Uniform frequency grid `ω_k = (k − c)·Δω`, `c = (n − 1)/2`, so the grid is
/// symmetric about zero and contains ω = 0 exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    n_points: usize,
    omega_max: f64,
}

impl FrequencyGrid {
    pub fn new(n_points: usize, omega_max: f64) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {n_points}")));
        }
        if n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_points must be odd so that the grid contains zero, got {n_points}"
            )));
        }
        if !(omega_max.is_finite() && omega_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "omega_max must be positive, got {omega_max}"
            )));
        }
        Ok(Self { n_points, omega_max })
    }

    /// Grid with spacing `spacing` that reaches at least `omega_max`.
    pub fn with_spacing(spacing: f64, omega_max: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        let half = (omega_max / spacing - 1e-9).ceil().max(1.0) as usize;
        Self::new(2 * half + 1, half as f64 * spacing)
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.omega_max / (self.n_points - 1) as f64
    }

    pub fn zero_index(&self) -> usize {
        (self.n_points - 1) / 2
    }

    pub fn omega(&self, k: usize) -> f64 {
        (k as f64 - self.zero_index() as f64) * self.spacing()
    }

    /// Index of −ω_k.
    pub fn mirror(&self, k: usize) -> usize {
        self.n_points - 1 - k
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.omega(k))
    }

    /// Lower bracketing index and interpolation fraction for `omega`.
    pub fn locate(&self, omega: f64) -> Result<(usize, f64)> {
        if !omega.is_finite() || omega.abs() > self.omega_max * (1.0 + 1e-12) {
            return Err(Error::OffGrid {
                omega,
                omega_max: self.omega_max,
            });
        }
        let pos = (omega / self.spacing() + self.zero_index() as f64).clamp(0.0, (self.n_points - 1) as f64);
        let k = (pos.floor() as usize).min(self.n_points - 2);
        Ok((k, pos - k as f64))
    }

    pub fn nearest_index(&self, omega: f64) -> Result<usize> {
        let (k, frac) = self.locate(omega)?;
        Ok(if frac > 0.5 { k + 1 } else { k })
    }
}

/// A complex `N×N` matrix per grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFunction {
    grid: FrequencyGrid,
    n_channels: usize,
    data: Vec<CMatrix>,
}

impl MatrixFunction {
    pub fn new(grid: FrequencyGrid, data: Vec<CMatrix>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} matrices for a grid of {} points",
                data.len(),
                grid.len()
            )));
        }
        let n = data[0].nrows();
        if n == 0 || data.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::ShapeMismatch(
                "matrices must all be square with the same size".into(),
            ));
        }
        Ok(Self {
            grid,
            n_channels: n,
            data,
        })
    }

    pub fn zeros(grid: FrequencyGrid, n_channels: usize) -> Self {
        Self {
            grid,
            n_channels,
            data: vec![CMatrix::zeros(n_channels, n_channels); grid.len()],
        }
    }

    pub fn from_fn(grid: FrequencyGrid, n_channels: usize, mut f: impl FnMut(f64) -> CMatrix) -> Result<Self> {
        Self::new(grid, grid.omegas().map(&mut f).collect::<Vec<_>>()).and_then(|mf| {
            if mf.n_channels != n_channels {
                Err(Error::ShapeMismatch(format!(
                    "expected {n_channels} channels, got {}",
                    mf.n_channels
                )))
            } else {
                Ok(mf)
            }
        })
    }

    /// Single-channel function from a real profile.
    pub fn scalar(grid: FrequencyGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            grid,
            n_channels: 1,
            data: grid.omegas().map(|w| linalg::scalar(f(w))).collect(),
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn data(&self) -> &[CMatrix] {
        &self.data
    }

    pub fn get(&self, k: usize) -> &CMatrix {
        &self.data[k]
    }

    pub fn into_data(self) -> Vec<CMatrix> {
        self.data
    }

    /// Linear interpolation between grid points.
    pub fn at(&self, omega: f64) -> Result<CMatrix> {
        let (k, frac) = self.grid.locate(omega)?;
        Ok(linalg::lerp(&self.data[k], &self.data[k + 1], frac))
    }

    /// Entry `(0, 0)` of every matrix, for single-channel functions.
    pub fn scalar_values(&self) -> Vec<Complex64> {
        self.data.iter().map(|m| m[(0, 0)]).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(linalg::norm).fold(0.0, f64::max)
    }

    pub fn map(&self, mut f: impl FnMut(f64, &CMatrix) -> CMatrix) -> Self {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, m)| f(self.grid.omega(k), m))
            .collect();
        Self {
            grid: self.grid,
            n_channels: self.n_channels,
            data,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|_, m| m.scale(factor))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.grid == other.grid && self.n_channels == other.n_channels
    }

    /// Worst Hermiticity deviation and where it occurs.
    pub fn hermitian_deviation(&self) -> (f64, f64) {
        self.data
            .iter()
            .enumerate()
            .map(|(k, m)| (linalg::hermitian_deviation(m), self.grid.omega(k)))
            .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc })
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        let tolerance = DEFAULT_EIG_TOL * self.max_norm();
        let (deviation, omega) = self.hermitian_deviation();
        if deviation > tolerance {
            return Err(Error::NonHermitianInput {
                omega,
                deviation,
                tolerance,
            });
        }
        Ok(())
    }
}

/// Uniformly sampled time kernel on `[−t_max, t_max]`, index `j` ↔
/// `t = (j − J)·dt` with `J = (len − 1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeKernel {
    dt: f64,
    data: Vec<CMatrix>,
}

impl TimeKernel {
    pub fn new(dt: f64, data: Vec<CMatrix>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if data.is_empty() || data.len().is_multiple_of(2) {
            return Err(Error::ShapeMismatch(format!(
                "time kernel needs an odd number of samples, got {}",
                data.len()
            )));
        }
        let n = data[0].nrows();
        if data.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::ShapeMismatch("time kernel matrices differ in size".into()));
        }
        Ok(Self { dt, data })
    }

    /// Samples `f(t)` on the symmetric window.
    pub fn from_fn(dt: f64, t_max: f64, mut f: impl FnMut(f64) -> CMatrix) -> Result<Self> {
        let half = (t_max / dt).round() as i64;
        Self::new(dt, (-half..=half).map(|j| f(j as f64 * dt)).collect())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn half_len(&self) -> usize {
        (self.data.len() - 1) / 2
    }

    pub fn t_max(&self) -> f64 {
        self.half_len() as f64 * self.dt
    }

    pub fn n_channels(&self) -> usize {
        self.data[0].nrows()
    }

    pub fn data(&self) -> &[CMatrix] {
        &self.data
    }

    pub fn time(&self, j: usize) -> f64 {
        (j as f64 - self.half_len() as f64) * self.dt
    }

    /// Value at the lag `lag·dt`.
    pub fn at_lag(&self, lag: i64) -> &CMatrix {
        &self.data[(self.half_len() as i64 + lag) as usize]
    }

    /// Entry `(0, 0)` at integer lag.
    pub fn scalar_at_lag(&self, lag: i64) -> Complex64 {
        self.at_lag(lag)[(0, 0)]
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dt: self.dt,
            data: self.data.iter().map(|m| m.scale(factor)).collect(),
        }
    }
}

/// Complex correlation together with its noise, dissipation and damping
/// parts on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub alpha: MatrixFunction,
    pub nu: MatrixFunction,
    pub mu: MatrixFunction,
    pub gamma: MatrixFunction,
}

impl KernelSet {
    /// Completes a kernel set from its noise and damping parts.
    pub fn from_nu_gamma(nu: MatrixFunction, gamma: MatrixFunction) -> Result<Self> {
        let alpha = reconstruct(&nu, &gamma)?;
        let mu = gamma.map(|w, g| g.scale(w) * Complex64::i());
        Ok(Self { alpha, nu, mu, gamma })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        self.alpha.grid()
    }

    pub fn n_channels(&self) -> usize {
        self.alpha.n_channels()
    }

    /// Same kernels with the damping (and dissipation) sign flipped and the
    /// noise kept, i.e. the amplifying counterpart.
    pub fn with_negated_damping(&self) -> Result<Self> {
        Self::from_nu_gamma(self.nu.clone(), self.gamma.scale(-1.0))
    }
}

/// Splits a complex correlation into noise, dissipation and damping kernels.
///
/// γ̃(0) cannot be obtained from μ̃/(iω); it is filled by extrapolating the
/// even part of γ̃ as a quadratic in ω² from the three nearest nonzero
/// frequency magnitudes (fewer on very small grids).
pub fn decompose(alpha: &MatrixFunction) -> Result<KernelSet> {
    alpha.ensure_hermitian()?;
    let grid = *alpha.grid();
    let n = alpha.n_channels();
    let half_i = Complex64::new(0.0, -0.5); // 1/(2i)

    let mut nu = Vec::with_capacity(grid.len());
    let mut mu = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let a = alpha.get(k);
        let mirrored = alpha.get(grid.mirror(k)).transpose();
        nu.push((a + &mirrored).scale(0.5));
        mu.push((a - &mirrored) * half_i);
    }

    let zero = grid.zero_index();
    let mut gamma: Vec<CMatrix> = mu
        .iter()
        .enumerate()
        .map(|(k, m)| {
            if k == zero {
                CMatrix::zeros(n, n)
            } else {
                m / Complex64::new(0.0, grid.omega(k))
            }
        })
        .collect();
    gamma[zero] = extrapolate_to_zero(&gamma, &grid);

    Ok(KernelSet {
        alpha: alpha.clone(),
        nu: MatrixFunction::new(grid, nu)?,
        mu: MatrixFunction::new(grid, mu)?,
        gamma: MatrixFunction::new(grid, gamma)?,
    })
}

fn extrapolate_to_zero(values: &[CMatrix], grid: &FrequencyGrid) -> CMatrix {
    let zero = grid.zero_index();
    let even = |j: usize| (&values[zero + j] + &values[zero - j]).scale(0.5);
    // Lagrange weights at u = 0 for nodes u = j² (j = 1, 2, 3).
    let weights: &[f64] = match zero {
        1 => &[1.0],
        2 => &[4.0 / 3.0, -1.0 / 3.0],
        _ => &[1.5, -0.6, 0.1],
    };
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| even(i + 1).scale(w))
        .fold(CMatrix::zeros(values[0].nrows(), values[0].ncols()), |acc, m| acc + m)
}

/// α̃(ω) = ν̃(ω) − ω γ̃(ω).
pub fn reconstruct(nu: &MatrixFunction, gamma: &MatrixFunction) -> Result<MatrixFunction> {
    if !nu.same_shape(gamma) {
        return Err(Error::GridMismatch);
    }
    let data = nu
        .data()
        .iter()
        .zip(gamma.data())
        .enumerate()
        .map(|(k, (n, g))| n - g.scale(nu.grid().omega(k)))
        .collect();
    MatrixFunction::new(*nu.grid(), data)
}
