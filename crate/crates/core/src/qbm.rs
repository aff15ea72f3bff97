//! Steady states of resonant oscillators coupled to a stationary environment.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{to_time, KernelSet, TimeKernel};
use crate::linalg::{self, CMatrix, DEFAULT_EIG_TOL};

/// `n_modes` oscillators of common mass and frequency, each coupled through
/// its position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorBank {
    pub n_modes: usize,
    pub mass: f64,
    pub frequency: f64,
}

impl OscillatorBank {
    pub fn new(n_modes: usize, mass: f64, frequency: f64) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidParameter("need at least one mode".into()));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "frequency must be positive, got {frequency}"
            )));
        }
        Ok(Self {
            n_modes,
            mass,
            frequency,
        })
    }

    pub fn single(mass: f64, frequency: f64) -> Result<Self> {
        Self::new(1, mass, frequency)
    }

    fn require_single(&self) -> Result<()> {
        if self.n_modes != 1 {
            return Err(Error::NotSingleMode(self.n_modes));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceCovariance {
    pub sigma_xx: DMatrix<f64>,
    pub sigma_xp: DMatrix<f64>,
    pub sigma_pp: DMatrix<f64>,
}

impl PhaseSpaceCovariance {
    pub fn n_modes(&self) -> usize {
        self.sigma_xx.nrows()
    }

    /// Full `2N×2N` matrix in `(x, p)` block order.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.sigma_xx);
        m.view_mut((0, n), (n, n)).copy_from(&self.sigma_xp);
        m.view_mut((n, 0), (n, n)).copy_from(&self.sigma_xp.transpose());
        m.view_mut((n, n), (n, n)).copy_from(&self.sigma_pp);
        m
    }

    pub fn single(xx: f64, xp: f64, pp: f64) -> Self {
        Self {
            sigma_xx: DMatrix::from_element(1, 1, xx),
            sigma_xp: DMatrix::from_element(1, 1, xp),
            sigma_pp: DMatrix::from_element(1, 1, pp),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean_x: DVector<f64>,
    pub mean_p: DVector<f64>,
    pub cov: PhaseSpaceCovariance,
}

impl GaussianState {
    pub fn single(mean_x: f64, mean_p: f64, cov: PhaseSpaceCovariance) -> Self {
        Self {
            mean_x: DVector::from_element(1, mean_x),
            mean_p: DVector::from_element(1, mean_p),
            cov,
        }
    }

    /// Symmetrised raw second moments `⟨{z_a, z_b}⟩/2` of `z = (x, p)` for
    /// the first mode, means included.
    fn raw_moments(&self) -> Matrix2<f64> {
        let (x, p) = (self.mean_x[0], self.mean_p[0]);
        let c = &self.cov;
        Matrix2::new(
            c.sigma_xx[(0, 0)] + x * x,
            c.sigma_xp[(0, 0)] + x * p,
            c.sigma_xp[(0, 0)] + x * p,
            c.sigma_pp[(0, 0)] + p * p,
        )
    }
}

/// Weak-coupling steady state from the kernels at resonance.
///
/// Solves `ν̃(ω₀) = ½(Xγ̃(ω₀) + γ̃(ω₀)X)` with `X = 2σ_pp/m`, then
/// `σ_xx = σ_pp/(mω₀)²` and `σ_xp = 0`. Kernels are interpolated linearly
/// between grid points and must be real at ω₀.
pub fn steady_state_covariance(bank: &OscillatorBank, k: &KernelSet) -> Result<PhaseSpaceCovariance> {
    if bank.n_modes != k.n_channels() {
        return Err(Error::ShapeMismatch(format!(
            "{} modes coupled to {} channels",
            bank.n_modes,
            k.n_channels()
        )));
    }
    let w0 = bank.frequency;
    let gamma = k.gamma.at(w0)?;
    let nu = k.nu.at(w0)?;
    let scale = linalg::norm(&gamma).max(linalg::norm(&nu));
    if linalg::max_imaginary(&gamma).max(linalg::max_imaginary(&nu)) > 1e-12 * scale {
        return Err(Error::NonRealKernel { omega: w0 });
    }
    let tol = DEFAULT_EIG_TOL * k.gamma.max_norm();
    let x = linalg::solve_symmetrized(&gamma, &nu, tol).map_err(|min_eigenvalue| Error::NotDamping {
        omega: w0,
        min_eigenvalue,
    })?;
    let m = bank.mass;
    let sigma_pp = linalg::real_part(&x).scale(0.5 * m);
    let sigma_xx = sigma_pp.scale(1.0 / (m * w0).powi(2));
    let n = bank.n_modes;
    Ok(PhaseSpaceCovariance {
        sigma_xx,
        sigma_xp: DMatrix::zeros(n, n),
        sigma_pp,
    })
}

/// Per-mode determinants `σ_xx σ_pp − σ_xp²` in the eigenbasis of σ_pp,
/// ordered by increasing momentum variance.
pub fn uncertainty_product(cov: &PhaseSpaceCovariance) -> Vec<f64> {
    let eig = SymmetricEigen::new(cov.sigma_pp.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .map(|i| {
            let u = eig.eigenvectors.column(i);
            let xx = (u.transpose() * &cov.sigma_xx * u)[(0, 0)];
            let xp = (u.transpose() * &cov.sigma_xp * u)[(0, 0)];
            let pp = (u.transpose() * &cov.sigma_pp * u)[(0, 0)];
            xx * pp - xp * xp
        })
        .collect()
}

/// `det ≥ 1/4 − tol` per mode.
pub fn hup_check(dets: &[f64], tol: f64) -> Vec<bool> {
    dets.iter().map(|d| *d >= 0.25 - tol).collect()
}

/// Smallest eigenvalue of `σ + (i/2)Ω`, with Ω the symplectic form in
/// `(x, p)` block order. Non-negative exactly for physical states; this
/// implies both σ ⪰ 0 and every per-mode determinant ≥ 1/4.
pub fn robertson_margin(cov: &PhaseSpaceCovariance) -> f64 {
    let n = cov.n_modes();
    let full = cov.full();
    let m = CMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let omega = if c == r + n {
            0.5
        } else if r == c + n {
            -0.5
        } else {
            0.0
        };
        Complex64::new(full[(r, c)], omega)
    });
    linalg::min_eigenvalue(&m)
}

/// Real time-domain noise, dissipation and damping kernels of a single
/// channel on a common window.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeKernels {
    pub nu: TimeKernel,
    pub mu: TimeKernel,
    pub gamma: TimeKernel,
}

impl TimeKernels {
    pub fn from_kernels(k: &KernelSet, t_max: f64, dt: f64) -> Result<Self> {
        if k.n_channels() != 1 {
            return Err(Error::NotSingleMode(k.n_channels()));
        }
        Ok(Self {
            nu: to_time(&k.nu, t_max, dt)?,
            mu: to_time(&k.mu, t_max, dt)?,
            gamma: to_time(&k.gamma, t_max, dt)?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.nu.dt()
    }

    pub fn t_max(&self) -> f64 {
        self.nu.t_max()
    }
}

/// Second-order master-equation coefficients of a single oscillator at time
/// `t`, plus the two boundary terms of the damping representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeCoefficients {
    pub d_normal: f64,
    pub d_anomalous: f64,
    pub damping_rate: f64,
    /// Shift of the squared frequency.
    pub freq_shift: f64,
    /// `2γ(0)/m`, the potential renormalisation.
    pub renormalization: f64,
    /// `2γ(t)/m`, the initial-slip weight.
    pub slip: f64,
}

/// `∫₀ᵗ f(s) ds` over samples `f(j·dt)`, trapezoid rule with a partial last
/// interval closed by linear interpolation.
fn integrate_to(samples: impl Fn(usize) -> f64, dt: f64, t: f64, available: usize) -> f64 {
    let steps = t / dt;
    let whole = (steps + 1e-9).floor() as usize;
    let frac = (steps - whole as f64).max(0.0);
    let mut sum = 0.0;
    for j in 0..whole {
        sum += 0.5 * (samples(j) + samples(j + 1)) * dt;
    }
    if frac > 1e-9 && whole < available {
        let (a, b) = (samples(whole), samples(whole + 1));
        let end = a + (b - a) * frac;
        sum += 0.5 * (a + end) * frac * dt;
    }
    sum
}

/// Coefficients of the one-oscillator master equation at time `t`:
///
/// ```text
/// D_normal     = ∫₀ᵗ ν(s) cos(ω₀s) ds
/// D_anomalous  = −∫₀ᵗ ν(s) sin(ω₀s) ds / (mω₀)
/// damping_rate = −(2/mω₀) ∫₀ᵗ μ(s) sin(ω₀s) ds
/// freq_shift   = (2/m) ∫₀ᵗ μ(s) cos(ω₀s) ds
/// ```
///
/// For long times these tend to `ν̃(ω₀)/2`, `γ̃(ω₀)/m`, and the principal-value
/// parts of the correlation at ω₀.
pub fn me_coefficients(bank: &OscillatorBank, kernels: &TimeKernels, t: f64) -> Result<MeCoefficients> {
    bank.require_single()?;
    let t_max = kernels.t_max();
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be non-negative, got {t}")));
    }
    if t > t_max * (1.0 + 1e-12) {
        return Err(Error::KernelWindowTooShort { t, t_max });
    }
    let (m, w0, dt) = (bank.mass, bank.frequency, kernels.dt());
    let available = kernels.nu.half_len();
    let nu = |j: usize| kernels.nu.scalar_at_lag(j as i64).re;
    let mu = |j: usize| kernels.mu.scalar_at_lag(j as i64).re;
    let s = |j: usize| j as f64 * dt;
    let integral = |f: &dyn Fn(usize) -> f64| integrate_to(f, dt, t.min(t_max), available);

    let nu_cos = integral(&|j| nu(j) * (w0 * s(j)).cos());
    let nu_sin = integral(&|j| nu(j) * (w0 * s(j)).sin());
    let mu_sin = integral(&|j| mu(j) * (w0 * s(j)).sin());
    let mu_cos = integral(&|j| mu(j) * (w0 * s(j)).cos());

    let gamma_at = |time: f64| {
        let steps = time / dt;
        let j = (steps.floor() as usize).min(available);
        let frac = steps - j as f64;
        let a = kernels.gamma.scalar_at_lag(j as i64).re;
        if frac > 1e-9 && j < available {
            a + (kernels.gamma.scalar_at_lag(j as i64 + 1).re - a) * frac
        } else {
            a
        }
    };

    Ok(MeCoefficients {
        d_normal: nu_cos,
        d_anomalous: -nu_sin / (m * w0),
        damping_rate: -2.0 * mu_sin / (m * w0),
        freq_shift: 2.0 * mu_cos / m,
        renormalization: 2.0 * gamma_at(0.0) / m,
        slip: 2.0 * gamma_at(t) / m,
    })
}

/// Velocity weights `a(τ)` with `ẋ(τ) = a(τ)·(x₀, p₀)` under free evolution.
fn velocity_weights(bank: &OscillatorBank, tau: f64) -> [f64; 2] {
    let w0 = bank.frequency;
    [-w0 * (w0 * tau).sin(), (w0 * tau).cos() / bank.mass]
}

/// Matrix `G` of the bilinear form `ΔE(t) = −tr(M G)` in the raw second
/// moments `M` of `(x₀, p₀)`:
///
/// ```text
/// G = ∫₀ᵗ∫₀ᵗ dτ₁ dτ₂ γ(τ₁ − τ₂) a(τ₁) a(τ₂)ᵀ
/// ```
///
/// evaluated by the trapezoid rule on the kernel's own sampling, with `t`
/// rounded to a whole number of steps. For a damping kernel `G` is positive
/// semidefinite.
pub fn dissipation_form(bank: &OscillatorBank, gamma_time: &TimeKernel, t: f64) -> Result<Matrix2<f64>> {
    bank.require_single()?;
    if gamma_time.n_channels() != 1 {
        return Err(Error::NotSingleMode(gamma_time.n_channels()));
    }
    let dt = gamma_time.dt();
    let t_max = gamma_time.t_max();
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be non-negative, got {t}")));
    }
    if t > t_max * (1.0 + 1e-12) {
        return Err(Error::KernelWindowTooShort { t, t_max });
    }
    let n = ((t / dt).round() as usize).min(gamma_time.half_len());
    if n == 0 {
        return Ok(Matrix2::zeros());
    }
    let weight = |i: usize| if i == 0 || i == n { 0.5 } else { 1.0 };
    let a: Vec<[f64; 2]> = (0..=n).map(|i| velocity_weights(bank, i as f64 * dt)).collect();
    let lag: Vec<f64> = (0..=n).map(|l| gamma_time.scalar_at_lag(l as i64).re).collect();
    let mut g = Matrix2::zeros();
    for i in 0..=n {
        let mut row = [0.0; 2];
        for j in 0..=n {
            let w = weight(j) * lag[i.abs_diff(j)];
            row[0] += w * a[j][0];
            row[1] += w * a[j][1];
        }
        for r in 0..2 {
            for c in 0..2 {
                g[(r, c)] += weight(i) * a[i][r] * row[c];
            }
        }
    }
    let g = g * (dt * dt);
    Ok((g + g.transpose()) * 0.5)
}

/// Energy exchanged with the environment up to time `t` by a freely
/// evolving oscillator prepared in `state0`; negative for a damping kernel.
pub fn dissipated_energy(
    bank: &OscillatorBank,
    gamma_time: &TimeKernel,
    state0: &GaussianState,
    t: f64,
) -> Result<f64> {
    let g = dissipation_form(bank, gamma_time, t)?;
    Ok(-(state0.raw_moments() * g).trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{build_kernels, thermal_kappa, Cutoff, EnvironmentState, SpectralModel};
    use crate::kernels::FrequencyGrid;

    fn kernels(state: EnvironmentState) -> KernelSet {
        let grid = FrequencyGrid::new(801, 40.0).unwrap();
        build_kernels(&SpectralModel::ohmic(0.05, Cutoff::Drude(20.0)), &state, &grid).unwrap()
    }

    #[test]
    fn thermal_steady_state() {
        let bank = OscillatorBank::single(2.0, 1.0).unwrap();
        let t = 0.8;
        let cov = steady_state_covariance(&bank, &kernels(EnvironmentState::Thermal { temperature: t })).unwrap();
        let coth = 1.0 / (1.0 / (2.0 * t)).tanh();
        assert!((cov.sigma_pp[(0, 0)] - 1.0 * coth).abs() < 1e-13);
        assert!((cov.sigma_xx[(0, 0)] - coth / 4.0).abs() < 1e-13);
        assert_eq!(cov.sigma_xp[(0, 0)], 0.0);
        let det = uncertainty_product(&cov)[0];
        assert!((det - (coth / 2.0).powi(2)).abs() < 1e-13);
        assert_eq!(hup_check(&[det], 1e-12), vec![true]);
    }

    #[test]
    fn ground_state_and_classical_vacuum() {
        let bank = OscillatorBank::single(1.5, 2.0).unwrap();
        let zero = steady_state_covariance(&bank, &kernels(EnvironmentState::ZeroTemperature)).unwrap();
        assert!((zero.sigma_pp[(0, 0)] - 1.5).abs() < 1e-13);
        assert!((zero.sigma_xx[(0, 0)] - 1.0 / 6.0).abs() < 1e-13);
        assert!((uncertainty_product(&zero)[0] - 0.25).abs() < 1e-13);
        let vac = steady_state_covariance(&bank, &kernels(EnvironmentState::Classical { temperature: 0.0 })).unwrap();
        assert_eq!(uncertainty_product(&vac)[0], 0.0);
        assert_eq!(hup_check(&[0.0], 1e-12), vec![false]);
    }

    #[test]
    fn amplifying_and_off_grid_inputs_are_rejected() {
        let bank = OscillatorBank::single(1.0, 1.0).unwrap();
        let k = kernels(EnvironmentState::Thermal { temperature: 1.0 });
        assert!(matches!(
            steady_state_covariance(&bank, &k.with_negated_damping().unwrap()),
            Err(Error::NotDamping { .. })
        ));
        let far = OscillatorBank::single(1.0, 100.0).unwrap();
        assert!(matches!(steady_state_covariance(&far, &k), Err(Error::OffGrid { .. })));
        let two = OscillatorBank::new(2, 1.0, 1.0).unwrap();
        assert!(matches!(
            steady_state_covariance(&two, &k),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn off_grid_resonance_interpolates() {
        let bank = OscillatorBank::single(1.0, 1.025).unwrap();
        let cov = steady_state_covariance(&bank, &kernels(EnvironmentState::ZeroTemperature)).unwrap();
        // ν̃ and γ̃ are interpolated separately, so κ̃ is only close to ω₀.
        assert!((cov.sigma_pp[(0, 0)] - 0.5 * 1.025).abs() < 1e-5);
    }

    #[test]
    fn robertson_margin_matches_the_single_mode_closed_form() {
        // eigenvalues of [[a, c + i/2], [c − i/2, b]]: (a+b)/2 ± √(((a−b)/2)² + c² + 1/4)
        for &(a, b, c) in &[(0.5f64, 0.5, 0.0), (2.0, 0.3, 0.1), (-1.0, -1.0, 0.0), (0.2, 0.2, 0.0)] {
            let expected = 0.5 * (a + b) - ((0.5 * (a - b)).powi(2) + c * c + 0.25).sqrt();
            let got = robertson_margin(&PhaseSpaceCovariance::single(a, c, b));
            assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
        }
        // a negative-variance pair can have det ≥ 1/4 yet is unphysical
        assert!(uncertainty_product(&PhaseSpaceCovariance::single(-1.0, 0.0, -1.0))[0] > 0.25);
        assert!(robertson_margin(&PhaseSpaceCovariance::single(-1.0, 0.0, -1.0)) < 0.0);
    }

    #[test]
    fn determinants_use_the_momentum_eigenbasis() {
        let cov = PhaseSpaceCovariance {
            sigma_xx: DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
            sigma_xp: DMatrix::zeros(2, 2),
            sigma_pp: DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 4.0]),
        };
        let dets = uncertainty_product(&cov);
        assert!((dets[0] - 2.0).abs() < 1e-13);
        assert!((dets[1] - 18.0).abs() < 1e-13);
        let full = cov.full();
        assert_eq!(full.nrows(), 4);
        assert_eq!(full, full.transpose());
    }

    #[test]
    fn coefficients_vanish_at_zero_time() {
        let bank = OscillatorBank::single(1.0, 1.0).unwrap();
        let tk =
            TimeKernels::from_kernels(&kernels(EnvironmentState::Thermal { temperature: 1.0 }), 2.0, 0.05).unwrap();
        let c = me_coefficients(&bank, &tk, 0.0).unwrap();
        assert_eq!(
            (c.d_normal, c.d_anomalous, c.damping_rate, c.freq_shift),
            (0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(c.slip, c.renormalization);
        assert!(matches!(
            me_coefficients(&bank, &tk, 3.0),
            Err(Error::KernelWindowTooShort { .. })
        ));
        let two = OscillatorBank::new(2, 1.0, 1.0).unwrap();
        assert!(matches!(me_coefficients(&two, &tk, 1.0), Err(Error::NotSingleMode(2))));
    }

    #[test]
    fn partial_interval_quadrature() {
        // ∫₀^{2.5} s ds over unit samples, exact for linear integrands
        let v = integrate_to(|j| j as f64, 1.0, 2.5, 10);
        assert!((v - 3.125).abs() < 1e-15);
    }

    #[test]
    fn coefficients_approach_resonant_kernels() {
        let grid = FrequencyGrid::with_spacing(0.02, 150.0).unwrap();
        let model = SpectralModel::ohmic(0.1, Cutoff::Drude(10.0));
        let t = 1.0;
        let k = build_kernels(&model, &EnvironmentState::Thermal { temperature: t }, &grid).unwrap();
        let tk = TimeKernels::from_kernels(&k, 8.0, 0.02).unwrap();
        let bank = OscillatorBank::single(1.0, 1.0).unwrap();
        let c = me_coefficients(&bank, &tk, 8.0).unwrap();
        let g = model.eval(1.0);
        assert!((c.damping_rate / g - 1.0).abs() < 2e-3, "{}", c.damping_rate / g);
        let nu = g * thermal_kappa(1.0, t);
        assert!(
            (c.d_normal / (nu / 2.0) - 1.0).abs() < 2e-3,
            "{}",
            c.d_normal / (nu / 2.0)
        );
        // Drude: γ(0) = γ₀Λ/2, less the 2γ₀Λ²/(π ω_max) tail cut off by the grid
        let tail = 2.0 * 0.1 * 100.0 / (std::f64::consts::PI * grid.omega_max());
        assert!((c.renormalization - (1.0 - tail)).abs() < 2e-3, "{}", c.renormalization);
    }

    #[test]
    fn dissipated_energy_signs() {
        let grid = FrequencyGrid::new(801, 40.0).unwrap();
        let model = SpectralModel::ohmic(0.2, Cutoff::Drude(5.0));
        let k = build_kernels(&model, &EnvironmentState::Thermal { temperature: 1.0 }, &grid).unwrap();
        let gamma = to_time(&k.gamma, 6.0, 0.05).unwrap();
        let bank = OscillatorBank::single(1.0, 1.0).unwrap();
        let state = GaussianState::single(0.3, -0.7, PhaseSpaceCovariance::single(0.5, 0.1, 0.6));
        let lost = dissipated_energy(&bank, &gamma, &state, 5.0).unwrap();
        assert!(lost < 0.0);
        let gained = dissipated_energy(&bank, &gamma.scale(-1.0), &state, 5.0).unwrap();
        assert!((gained + lost).abs() < 1e-15 * lost.abs().max(1.0));
        let zero = dissipated_energy(&bank, &gamma.scale(0.0), &state, 5.0).unwrap();
        assert_eq!(zero, 0.0);
        assert_eq!(dissipated_energy(&bank, &gamma, &state, 0.0).unwrap(), 0.0);
        assert!(matches!(
            dissipated_energy(&bank, &gamma, &state, 7.0),
            Err(Error::KernelWindowTooShort { .. })
        ));
    }
}
