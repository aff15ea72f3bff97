//! Classical Langevin validation of the weak-coupling steady state.
//!
//! Trajectories of
//!
//! ```text
//! m ẍ + 2∫₀ᵗ γ(t − τ) ẋ(τ) dτ + m ω₀² x = ξ(t),   ⟨ξ(t)ξᵀ(0)⟩ = ν(t)
//! ```
//!
//! are integrated with Heun steps and their late-time covariances compared
//! with the prediction from the kernels at ω₀.

mod noise;

pub use noise::{generate_noise, periodogram, NoiseEnsemble, NoisePath};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{build_kernels, EnvironmentState, SpectralModel};
use crate::error::{Error, Result};
use crate::kernels::{FrequencyGrid, KernelSet};
use crate::linalg::{self, DEFAULT_EIG_TOL};
use crate::qbm::{steady_state_covariance, uncertainty_product, OscillatorBank, PhaseSpaceCovariance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Memoryless damping force `γ̃(ω₀) ẋ`.
    Local,
    /// Full convolution over a truncated history.
    Memory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub mode: SimulationMode,
    pub steps_per_period: usize,
    /// Burn-in length in units of the relaxation time `m/γ̃(ω₀)`.
    pub burn_in_relaxations: f64,
    /// Measurement window in units of the relaxation time.
    pub measure_relaxations: f64,
    /// History kept by the memory integral; defaults to 8 over the
    /// half-width of γ̃.
    pub memory_time: Option<f64>,
    pub n_batches: usize,
    /// Initial `(x, p)` per mode; the oscillators start at rest otherwise.
    pub initial: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            mode: SimulationMode::Local,
            steps_per_period: 128,
            burn_in_relaxations: 10.0,
            measure_relaxations: 10.0,
            memory_time: None,
            n_batches: 20,
            initial: None,
        }
    }
}

/// Step size and step counts derived from a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub dt: f64,
    pub burn_in_steps: usize,
    pub measured_steps: usize,
}

impl RunPlan {
    pub fn n_steps(&self) -> usize {
        self.burn_in_steps + self.measured_steps
    }
}

/// Real damping matrix at ω₀, required to be positive definite.
fn resonant_damping(bank: &OscillatorBank, k: &KernelSet) -> Result<DMatrix<f64>> {
    if bank.n_modes != k.n_channels() {
        return Err(Error::ShapeMismatch(format!(
            "{} modes coupled to {} channels",
            bank.n_modes,
            k.n_channels()
        )));
    }
    let w0 = bank.frequency;
    let g = k.gamma.at(w0)?;
    if linalg::max_imaginary(&g) > 1e-12 * linalg::norm(&g) {
        return Err(Error::NonRealKernel { omega: w0 });
    }
    let min_eigenvalue = linalg::min_eigenvalue(&g);
    if min_eigenvalue <= DEFAULT_EIG_TOL * k.gamma.max_norm() {
        return Err(Error::NotDamping {
            omega: w0,
            min_eigenvalue,
        });
    }
    Ok(linalg::real_part(&g))
}

impl SimulationConfig {
    pub fn with_mode(mut self, mode: SimulationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn plan(&self, bank: &OscillatorBank, k: &KernelSet) -> Result<RunPlan> {
        if self.steps_per_period < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 steps per period, got {}",
                self.steps_per_period
            )));
        }
        if !(self.burn_in_relaxations >= 0.0 && self.measure_relaxations > 0.0) {
            return Err(Error::InvalidParameter(
                "burn-in and measurement lengths must be positive".into(),
            ));
        }
        if self.n_batches < 2 {
            return Err(Error::InvalidParameter("need at least two batches".into()));
        }
        let gamma = resonant_damping(bank, k)?;
        let rate = gamma.symmetric_eigenvalues().min() / bank.mass;
        let relaxation = 1.0 / rate;
        let dt = 2.0 * PI / (self.steps_per_period as f64 * bank.frequency);
        let burn_in_steps = (self.burn_in_relaxations * relaxation / dt).ceil() as usize;
        let measured_steps = ((self.measure_relaxations * relaxation / dt).ceil() as usize).max(self.n_batches);
        Ok(RunPlan {
            dt,
            burn_in_steps,
            measured_steps,
        })
    }
}

/// Empirical steady-state covariances with batch-mean standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    pub covariance: PhaseSpaceCovariance,
    pub se_xx: DMatrix<f64>,
    pub se_xp: DMatrix<f64>,
    pub se_pp: DMatrix<f64>,
    /// Uncertainty products of the pooled covariance, per mode.
    pub dets: Vec<f64>,
    pub det_se: Vec<f64>,
    pub burn_in_steps: usize,
    pub measured_steps: usize,
    pub n_trajectories: usize,
    pub n_batches: usize,
    pub dt: f64,
}

/// Relative variation of γ̃ over `[0, 2ω₀]`, the condition for replacing
/// the memory integral by `γ̃(ω₀) ẋ`.
pub fn local_variation(bank: &OscillatorBank, k: &KernelSet) -> Result<f64> {
    let w0 = bank.frequency;
    let grid = k.grid();
    let reference = linalg::norm(&k.gamma.at(w0)?);
    let top = (2.0 * w0).min(grid.omega_max());
    let mut worst = 0.0_f64;
    for j in grid.zero_index()..grid.len() {
        if grid.omega(j) > top {
            break;
        }
        worst = worst.max(linalg::norm(&(k.gamma.get(j) - k.gamma.at(w0)?)));
    }
    worst = worst.max(linalg::norm(&(k.gamma.at(top)? - k.gamma.at(w0)?)));
    Ok(worst / reference)
}

/// Width at which γ̃ falls to half its zero-frequency size.
fn half_width(k: &KernelSet) -> f64 {
    let grid = k.grid();
    let g0 = linalg::norm(k.gamma.get(grid.zero_index()));
    (grid.zero_index()..grid.len())
        .find(|&j| linalg::norm(k.gamma.get(j)) <= 0.5 * g0)
        .map(|j| grid.omega(j))
        .unwrap_or(grid.omega_max())
}

/// Product-integration weights `w_k` with `∫₀^{Kh} γ(s) v(t − s) ds ≈ Σ_k w_k v(t − kh)`
/// for piecewise-linear `v`, evaluated from γ̃ on its grid:
///
/// ```text
/// w_0 = (1/2π) ∫ γ̃(ω) h (1 − cos ωh)/(ωh)² dω
/// w_k = (1/2π) ∫ γ̃(ω) cos(kωh) h sinc²(ωh/2) dω,   k ≥ 1
/// ```
pub fn memory_weights(k: &KernelSet, h: f64, n_weights: usize) -> Vec<DMatrix<f64>> {
    let grid = k.grid();
    let dw = grid.spacing();
    let n = k.n_channels();
    let gamma: Vec<DMatrix<f64>> = k.gamma.data().iter().map(linalg::real_part).collect();
    (0..n_weights)
        .into_par_iter()
        .map(|idx| {
            let mut acc = DMatrix::zeros(n, n);
            for (j, g) in gamma.iter().enumerate() {
                let w = grid.omega(j);
                let u = w * h;
                let shape = if idx == 0 {
                    if u.abs() < 1e-4 {
                        h * (0.5 - u * u / 24.0)
                    } else {
                        h * (1.0 - u.cos()) / (u * u)
                    }
                } else {
                    let half = 0.5 * u;
                    let sinc = if half.abs() < 1e-8 { 1.0 } else { half.sin() / half };
                    (idx as f64 * u).cos() * h * sinc * sinc
                };
                let trapezoid = if j == 0 || j + 1 == grid.len() { 0.5 } else { 1.0 };
                acc += g * (shape * trapezoid * dw / (2.0 * PI));
            }
            acc
        })
        .collect()
}

fn matvec_add(m: &[f64], x: &[f64], scale: f64, out: &mut [f64]) {
    let n = x.len();
    for r in 0..n {
        let mut s = 0.0;
        for c in 0..n {
            s += m[r * n + c] * x[c];
        }
        out[r] += scale * s;
    }
}

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n * n).map(|i| m[(i / n, i % n)]).collect()
}

/// Damping force `F` from the newest velocity and the stored history.
enum Damping {
    Local(Vec<f64>),
    Memory { weights: Vec<Vec<f64>> },
}

/// Per-trajectory sums of `x xᵀ`, `x pᵀ`, `p pᵀ`, `x`, `p`, one set per
/// time block.
#[derive(Clone)]
struct BlockSums {
    xx: Vec<f64>,
    xp: Vec<f64>,
    pp: Vec<f64>,
    x: Vec<f64>,
    p: Vec<f64>,
    count: f64,
}

impl BlockSums {
    fn new(n: usize) -> Self {
        Self {
            xx: vec![0.0; n * n],
            xp: vec![0.0; n * n],
            pp: vec![0.0; n * n],
            x: vec![0.0; n],
            p: vec![0.0; n],
            count: 0.0,
        }
    }

    fn add(&mut self, x: &[f64], p: &[f64]) {
        let n = x.len();
        for r in 0..n {
            for c in 0..n {
                self.xx[r * n + c] += x[r] * x[c];
                self.xp[r * n + c] += x[r] * p[c];
                self.pp[r * n + c] += p[r] * p[c];
            }
            self.x[r] += x[r];
            self.p[r] += p[r];
        }
        self.count += 1.0;
    }

    fn merge(&mut self, other: &BlockSums) {
        for (a, b) in self.xx.iter_mut().zip(&other.xx) {
            *a += b;
        }
        for (a, b) in self.xp.iter_mut().zip(&other.xp) {
            *a += b;
        }
        for (a, b) in self.pp.iter_mut().zip(&other.pp) {
            *a += b;
        }
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a += b;
        }
        for (a, b) in self.p.iter_mut().zip(&other.p) {
            *a += b;
        }
        self.count += other.count;
    }

    fn covariance(&self) -> PhaseSpaceCovariance {
        let n = self.x.len();
        let c = self.count;
        let mx: Vec<f64> = self.x.iter().map(|v| v / c).collect();
        let mp: Vec<f64> = self.p.iter().map(|v| v / c).collect();
        let xx = DMatrix::from_fn(n, n, |r, k| self.xx[r * n + k] / c - mx[r] * mx[k]);
        let xp = DMatrix::from_fn(n, n, |r, k| self.xp[r * n + k] / c - mx[r] * mp[k]);
        let pp = DMatrix::from_fn(n, n, |r, k| self.pp[r * n + k] / c - mp[r] * mp[k]);
        PhaseSpaceCovariance {
            sigma_xx: (&xx + xx.transpose()) * 0.5,
            sigma_xp: xp,
            sigma_pp: (&pp + pp.transpose()) * 0.5,
        }
    }
}

struct Integrator<'a> {
    bank: &'a OscillatorBank,
    damping: Damping,
    dt: f64,
    burn_in: usize,
    measured: usize,
    n_blocks: usize,
    reference_energy: f64,
    initial: Option<&'a (Vec<f64>, Vec<f64>)>,
}

impl Integrator<'_> {
    fn energy(&self, x: &[f64], v: &[f64]) -> f64 {
        let (m, w0) = (self.bank.mass, self.bank.frequency);
        x.iter().zip(v).map(|(x, v)| 0.5 * m * (v * v + w0 * w0 * x * x)).sum()
    }

    /// `F = 2 Σ_k w_k v_{n−k}` with `history[0]` the newest velocity.
    fn force(&self, newest: &[f64], history: &[Vec<f64>], head: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|f| *f = 0.0);
        match &self.damping {
            Damping::Local(g) => matvec_add(g, newest, 1.0, out),
            Damping::Memory { weights } => {
                matvec_add(&weights[0], newest, 2.0, out);
                let len = history.len();
                for (k, w) in weights.iter().enumerate().skip(1) {
                    // history[(head + k − 1) % len] holds v_{n+1−k} relative to `newest`
                    let past = &history[(head + k - 1) % len];
                    matvec_add(w, past, 2.0, out);
                }
            }
        }
    }

    fn run(&self, noise: &NoisePath) -> Result<Vec<BlockSums>> {
        let n = self.bank.n_modes;
        let (m, w0, h) = (self.bank.mass, self.bank.frequency, self.dt);
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; n];
        if let Some((x0, p0)) = self.initial {
            x.copy_from_slice(x0);
            for (vi, pi) in v.iter_mut().zip(p0) {
                *vi = pi / m;
            }
        }
        let n_hist = match &self.damping {
            Damping::Local(_) => 1,
            Damping::Memory { weights } => weights.len().max(1),
        };
        // Ring buffer of past velocities; slot `head` is the newest stored one.
        let mut history = vec![vec![0.0; n]; n_hist];
        let mut head = 0usize;
        history[head].copy_from_slice(&v);
        let prev = |head: usize| (head + 1) % n_hist;

        let mut force = vec![0.0; n];
        let mut force_pred = vec![0.0; n];
        let mut acc = vec![0.0; n];
        let mut acc_pred = vec![0.0; n];
        let mut x_pred = vec![0.0; n];
        let mut v_pred = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut blocks = vec![BlockSums::new(n); self.n_blocks];
        let per_block = self.measured.div_ceil(self.n_blocks);

        // force at step 0 uses v_0 and an empty past
        self.force(&v, &history, prev(head), &mut force);
        let limit = 1e6 * self.reference_energy;
        let total = self.burn_in + self.measured;
        for step in 0..total {
            let xi0 = noise.at(step);
            let xi1 = noise.at(step + 1);
            for i in 0..n {
                acc[i] = -w0 * w0 * x[i] + (xi0[i] - force[i]) / m;
                x_pred[i] = x[i] + h * v[i];
                v_pred[i] = v[i] + h * acc[i];
            }
            // predictor force: newest is v_pred, past starts at v_n = history[head]
            self.force(&v_pred, &history, head, &mut force_pred);
            for i in 0..n {
                acc_pred[i] = -w0 * w0 * x_pred[i] + (xi1[i] - force_pred[i]) / m;
                x[i] += 0.5 * h * (v[i] + v_pred[i]);
                v[i] += 0.5 * h * (acc[i] + acc_pred[i]);
            }
            head = (head + n_hist - 1) % n_hist;
            history[head].copy_from_slice(&v);
            self.force(&v, &history, prev(head), &mut force);

            let energy = self.energy(&x, &v);
            if energy.is_nan() || energy > limit {
                return Err(Error::Unstable {
                    time: (step + 1) as f64 * h,
                    energy,
                });
            }
            if step + 1 > self.burn_in {
                let idx = step - self.burn_in;
                for i in 0..n {
                    p[i] = m * v[i];
                }
                blocks[(idx / per_block).min(self.n_blocks - 1)].add(&x, &p);
            }
        }
        Ok(blocks)
    }
}

/// Integrates every trajectory of `noise` and returns batch-mean
/// statistics of the late-time covariances.
///
/// The noise must have the plan's step and at least its number of steps.
/// Batches are groups of trajectories when there are at least `n_batches`
/// of them, and consecutive time blocks of the pooled ensemble otherwise.
pub fn simulate(
    bank: &OscillatorBank,
    k: &KernelSet,
    noise: &NoiseEnsemble,
    config: &SimulationConfig,
) -> Result<TrajectoryStats> {
    let plan = config.plan(bank, k)?;
    if (noise.dt() - plan.dt).abs() > 1e-12 * plan.dt {
        return Err(Error::InvalidParameter(format!(
            "noise step {} differs from the integration step {}",
            noise.dt(),
            plan.dt
        )));
    }
    if noise.n_steps() < plan.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "noise covers {} steps, the run needs {}",
            noise.n_steps(),
            plan.n_steps()
        )));
    }
    if noise.n_channels() != bank.n_modes {
        return Err(Error::ShapeMismatch(format!(
            "{} noise channels for {} modes",
            noise.n_channels(),
            bank.n_modes
        )));
    }
    if let Some((x0, p0)) = &config.initial {
        if x0.len() != bank.n_modes || p0.len() != bank.n_modes {
            return Err(Error::ShapeMismatch(
                "initial state has the wrong number of modes".into(),
            ));
        }
    }

    let gamma_w0 = resonant_damping(bank, k)?;
    let damping = match config.mode {
        SimulationMode::Local => {
            let variation = local_variation(bank, k)?;
            if variation > 0.01 {
                return Err(Error::LocalApproximationInvalid { variation });
            }
            Damping::Local(flatten(&gamma_w0))
        }
        SimulationMode::Memory => {
            if linalg::max_imaginary_all(&k.gamma) > 1e-12 * k.gamma.max_norm() {
                return Err(Error::NonRealKernel { omega: bank.frequency });
            }
            let memory_time = config.memory_time.unwrap_or_else(|| 8.0 / half_width(k));
            let n_weights = ((memory_time / plan.dt).ceil() as usize).max(1) + 1;
            Damping::Memory {
                weights: memory_weights(k, plan.dt, n_weights).iter().map(flatten).collect(),
            }
        }
    };

    let predicted_energy = steady_state_covariance(bank, k)
        .map(|c| c.sigma_pp.trace() / bank.mass)
        .unwrap_or(0.0);
    let n_trajectories = noise.n_trajectories();
    let n_blocks = if n_trajectories >= config.n_batches {
        1
    } else {
        config.n_batches
    };
    let mut integrator = Integrator {
        bank,
        damping,
        dt: plan.dt,
        burn_in: plan.burn_in_steps,
        measured: plan.measured_steps,
        n_blocks,
        reference_energy: 0.0,
        initial: config.initial.as_ref(),
    };
    let initial_energy = config
        .initial
        .as_ref()
        .map(|(x0, p0)| {
            let v: Vec<f64> = p0.iter().map(|p| p / bank.mass).collect();
            integrator.energy(x0, &v)
        })
        .unwrap_or(0.0);
    integrator.reference_energy = predicted_energy.max(initial_energy).max(f64::MIN_POSITIVE);

    let per_trajectory: Vec<Vec<BlockSums>> = (0..n_trajectories)
        .into_par_iter()
        .map(|i| integrator.run(&noise.path(i)))
        .collect::<Result<_>>()?;

    let n = bank.n_modes;
    let batches: Vec<BlockSums> = if n_blocks == 1 {
        (0..config.n_batches)
            .map(|b| {
                let mut sum = BlockSums::new(n);
                for (i, t) in per_trajectory.iter().enumerate() {
                    if i * config.n_batches / n_trajectories == b {
                        sum.merge(&t[0]);
                    }
                }
                sum
            })
            .collect()
    } else {
        (0..n_blocks)
            .map(|b| {
                let mut sum = BlockSums::new(n);
                for t in &per_trajectory {
                    sum.merge(&t[b]);
                }
                sum
            })
            .collect()
    };
    let mut pooled = BlockSums::new(n);
    for b in &batches {
        pooled.merge(b);
    }
    let covariance = pooled.covariance();
    let batch_cov: Vec<PhaseSpaceCovariance> = batches.iter().map(BlockSums::covariance).collect();
    let nb = batch_cov.len() as f64;
    let se = |pick: fn(&PhaseSpaceCovariance) -> &DMatrix<f64>| {
        DMatrix::from_fn(n, n, |r, c| {
            let vals: Vec<f64> = batch_cov.iter().map(|cv| pick(cv)[(r, c)]).collect();
            standard_error(&vals, nb)
        })
    };
    let se_xx = se(|c| &c.sigma_xx);
    let se_xp = se(|c| &c.sigma_xp);
    let se_pp = se(|c| &c.sigma_pp);
    let dets = uncertainty_product(&covariance);
    let batch_dets: Vec<Vec<f64>> = batch_cov.iter().map(uncertainty_product).collect();
    let det_se = (0..n)
        .map(|mode| standard_error(&batch_dets.iter().map(|d| d[mode]).collect::<Vec<_>>(), nb))
        .collect();

    Ok(TrajectoryStats {
        covariance,
        se_xx,
        se_xp,
        se_pp,
        dets,
        det_se,
        burn_in_steps: plan.burn_in_steps,
        measured_steps: plan.measured_steps,
        n_trajectories,
        n_batches: batches.len(),
        dt: plan.dt,
    })
}

fn standard_error(values: &[f64], n: f64) -> f64 {
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Plans the run, synthesises the noise from `k.nu` and simulates.
pub fn run_ensemble(
    bank: &OscillatorBank,
    k: &KernelSet,
    config: &SimulationConfig,
    n_trajectories: usize,
    seed: u64,
) -> Result<TrajectoryStats> {
    let plan = config.plan(bank, k)?;
    let noise = generate_noise(&k.nu, plan.dt, plan.n_steps(), n_trajectories, seed)?;
    simulate(bank, k, &noise, config)
}

/// Empirical versus predicted uncertainty product at one damping strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma0: f64,
    pub det: f64,
    pub det_se: f64,
    pub predicted: f64,
}

/// Runs [`run_ensemble`] for each damping strength and compares the first
/// mode's uncertainty product with `(κ̃(ω₀)/2ω₀)²`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_damping(
    bank: &OscillatorBank,
    model: &SpectralModel,
    state: &EnvironmentState,
    grid: &FrequencyGrid,
    gamma0s: &[f64],
    config: &SimulationConfig,
    n_trajectories: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    gamma0s
        .iter()
        .map(|&gamma0| {
            let k = build_kernels(&model.with_gamma0(gamma0), state, grid)?;
            let stats = run_ensemble(bank, &k, config, n_trajectories, seed)?;
            let predicted = uncertainty_product(&steady_state_covariance(bank, &k)?)[0];
            Ok(SweepRow {
                gamma0,
                det: stats.dets[0],
                det_se: stats.det_se[0],
                predicted,
            })
        })
        .collect()
}
