use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear even function of ω, tabulated on `|ω| ≥ 0` and held
/// constant beyond the first and last nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    points: Vec<(f64, f64)>,
}

impl Table {
    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidEnvironment("table needs at least one point".into()));
        }
        if points
            .iter()
            .any(|&(x, y)| !(x.is_finite() && x >= 0.0 && y.is_finite()))
        {
            return Err(Error::InvalidEnvironment(
                "table abscissae must be finite |omega| >= 0 with finite values".into(),
            ));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidEnvironment("table abscissae must be distinct".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let x = omega.abs();
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if x >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|p| p.0 <= x) - 1;
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[i + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// User-supplied FDR kernel; evaluated at |ω| so the result is even.
#[derive(Clone)]
pub struct KappaFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl KappaFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for KappaFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("KappaFn(..)")
    }
}

impl PartialEq for KappaFn {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

/// Statistical state of the environment, summarised by its scalar FDR
/// kernel κ̃(ω) = ν̃(ω)/γ̃(ω).
#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentState {
    Thermal {
        temperature: f64,
    },
    ZeroTemperature,
    /// Population-inverted reservoir, `temperature < 0`.
    NegativeTemperature {
        temperature: f64,
    },
    /// Squeezed thermal reservoir with squeezing r(|ω|).
    Squeezed {
        temperature: f64,
        squeezing: Table,
    },
    /// Classical noise with κ̃ = 2T_cl; `T_cl = 0` is the classical vacuum.
    Classical {
        temperature: f64,
    },
    Custom(KappaFn),
}

/// ω coth(ω/2T), with its exact limit 2T at ω = 0; `T = 0` gives |ω|.
pub fn thermal_kappa(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        return omega.abs();
    }
    let x = omega / (2.0 * temperature);
    if x.abs() < 1e-3 {
        let x2 = x * x;
        2.0 * temperature * (1.0 + x2 / 3.0 - x2 * x2 / 45.0 + 2.0 * x2 * x2 * x2 / 945.0)
    } else {
        omega / x.tanh()
    }
}

impl EnvironmentState {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidEnvironment(msg));
        match self {
            EnvironmentState::Thermal { temperature } if !(temperature.is_finite() && *temperature > 0.0) => {
                bad(format!("thermal temperature must be positive, got {temperature}"))
            }
            EnvironmentState::NegativeTemperature { temperature }
                if !(temperature.is_finite() && *temperature < 0.0) =>
            {
                bad(format!("negative temperature must be below zero, got {temperature}"))
            }
            EnvironmentState::Squeezed { temperature, .. } if !(temperature.is_finite() && *temperature >= 0.0) => bad(
                format!("squeezed-state temperature must be non-negative, got {temperature}"),
            ),
            EnvironmentState::Classical { temperature } if !(temperature.is_finite() && *temperature >= 0.0) => {
                bad(format!("classical temperature must be non-negative, got {temperature}"))
            }
            _ => Ok(()),
        }
    }

    pub fn kappa(&self, omega: f64) -> f64 {
        match self {
            EnvironmentState::Thermal { temperature } | EnvironmentState::NegativeTemperature { temperature } => {
                thermal_kappa(omega, *temperature)
            }
            EnvironmentState::ZeroTemperature => omega.abs(),
            EnvironmentState::Squeezed { temperature, squeezing } => {
                (2.0 * squeezing.eval(omega)).cosh() * thermal_kappa(omega, *temperature)
            }
            EnvironmentState::Classical { temperature } => 2.0 * temperature,
            EnvironmentState::Custom(f) => (f.0)(omega.abs()),
        }
    }

    /// Whether the state is expected to respect κ̃(ω) ≥ |ω|.
    pub fn is_quantum(&self) -> bool {
        matches!(
            self,
            EnvironmentState::Thermal { .. } | EnvironmentState::ZeroTemperature | EnvironmentState::Squeezed { .. }
        )
    }
}
