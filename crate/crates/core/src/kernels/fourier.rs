//! Discrete Fourier pair between frequency grids and time windows.
//!
//! Both directions are trapezoid quadratures of the continuous transforms.
//! Grid spacing and time step are independent, so the sums are evaluated
//! with a chirp-z (Bluestein) transform rather than a plain FFT.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{FrequencyGrid, MatrixFunction, TimeKernel};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// `y_j = Σ_k x_k e^{iθ·k·j}` for `j = 0..m`.
pub fn chirp_transform(x: &[Complex64], theta: f64, m: usize) -> Vec<Complex64> {
    ChirpPlan::new(x.len(), theta, m).apply(x)
}

struct ChirpPlan {
    n: usize,
    m: usize,
    len: usize,
    theta: f64,
    kernel_fft: Vec<Complex64>,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

fn chirp(theta: f64, k: usize, sign: f64) -> Complex64 {
    let k = k as f64;
    Complex64::from_polar(1.0, sign * 0.5 * theta * (k * k))
}

impl ChirpPlan {
    fn new(n: usize, theta: f64, m: usize) -> Self {
        let len = (n + m).max(2).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        for (l, slot) in kernel.iter_mut().enumerate().take(m) {
            *slot = chirp(theta, l, -1.0);
        }
        for l in 1..n {
            kernel[len - l] = chirp(theta, l, -1.0);
        }
        forward.process(&mut kernel);
        Self {
            n,
            m,
            len,
            theta,
            kernel_fft: kernel,
            forward,
            inverse,
        }
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.n);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (k, (slot, &v)) in buf.iter_mut().zip(x).enumerate() {
            *slot = v * chirp(self.theta, k, 1.0);
        }
        self.forward.process(&mut buf);
        for (b, &h) in buf.iter_mut().zip(&self.kernel_fft) {
            *b *= h;
        }
        self.inverse.process(&mut buf);
        let norm = 1.0 / self.len as f64;
        (0..self.m).map(|j| buf[j] * chirp(self.theta, j, 1.0) * norm).collect()
    }
}

fn trapezoid_weight(k: usize, n: usize) -> f64 {
    if n > 1 && (k == 0 || k == n - 1) {
        0.5
    } else {
        1.0
    }
}

fn check_nyquist(dt: f64, grid: &FrequencyGrid) -> Result<()> {
    let limit = PI / grid.omega_max();
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::AliasingRisk { dt, limit });
    }
    Ok(())
}

/// Applies a per-entry scalar transform to every matrix element.
fn transform_entries(
    input: &[CMatrix],
    n_out: usize,
    per_entry: impl Fn(&[Complex64]) -> Vec<Complex64> + Sync,
) -> Vec<CMatrix> {
    let n = input[0].nrows();
    let columns: Vec<Vec<Complex64>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (r, c) = (idx / n, idx % n);
            let series: Vec<Complex64> = input.iter().map(|m| m[(r, c)]).collect();
            per_entry(&series)
        })
        .collect();
    (0..n_out)
        .map(|j| CMatrix::from_fn(n, n, |r, c| columns[r * n + c][j]))
        .collect()
}

/// Inverse transform `α(t) = (1/2π) ∫ dω e^{iωt} α̃(ω)` sampled on
/// `[−t_max, t_max]` with step `dt`.
///
/// `t_max` is rounded to a whole number of steps. Requires
/// `dt ≤ π/ω_max`.
pub fn to_time(f: &MatrixFunction, t_max: f64, dt: f64) -> Result<TimeKernel> {
    let grid = *f.grid();
    check_nyquist(dt, &grid)?;
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_max must be non-negative, got {t_max}"
        )));
    }
    let half = (t_max / dt).round() as usize;
    let n_t = 2 * half + 1;
    let n_w = grid.len();
    let dw = grid.spacing();
    let theta = dw * dt;
    let center = grid.zero_index() as f64;
    let plan = ChirpPlan::new(n_w, theta, n_t);

    let data = transform_entries(f.data(), n_t, |series| {
        let pre: Vec<Complex64> = series
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let w = trapezoid_weight(k, n_w) * dw / (2.0 * PI);
                v * w * Complex64::from_polar(1.0, -theta * (k as f64) * half as f64)
            })
            .collect();
        let mut out = plan.apply(&pre);
        for (j, y) in out.iter_mut().enumerate() {
            *y *= Complex64::from_polar(1.0, -theta * center * (j as f64 - half as f64));
        }
        out
    });
    TimeKernel::new(dt, data)
}

/// Forward transform `α̃(ω) = ∫ dτ e^{−iωτ} α(τ)` by the trapezoid rule over
/// the kernel window, evaluated on `grid`.
pub fn to_frequency(k: &TimeKernel, grid: &FrequencyGrid) -> Result<MatrixFunction> {
    let dt = k.dt();
    check_nyquist(dt, grid)?;
    let half = k.half_len();
    let n_t = k.data().len();
    let n_w = grid.len();
    let theta = grid.spacing() * dt;
    let center = grid.zero_index() as f64;
    let plan = ChirpPlan::new(n_t, -theta, n_w);

    let data = transform_entries(k.data(), n_w, |series| {
        let pre: Vec<Complex64> = series
            .iter()
            .enumerate()
            .map(|(j, &v)| v * (trapezoid_weight(j, n_t) * dt) * Complex64::from_polar(1.0, theta * center * j as f64))
            .collect();
        let mut out = plan.apply(&pre);
        for (kk, y) in out.iter_mut().enumerate() {
            *y *= Complex64::from_polar(1.0, theta * (kk as f64 - center) * half as f64);
        }
        out
    });
    MatrixFunction::new(*grid, data)
}
