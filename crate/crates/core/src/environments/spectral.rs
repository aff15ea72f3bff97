use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lambda", rename_all = "snake_case")]
pub enum Cutoff {
    None,
    Exponential(f64),
    Drude(f64),
    Sharp(f64),
}

impl Cutoff {
    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Cutoff::None => None,
            Cutoff::Exponential(l) | Cutoff::Drude(l) | Cutoff::Sharp(l) => Some(l),
        }
    }

    /// Cutoff factor as a function of `x = |ω|/Λ`.
    fn factor(&self, x: f64) -> f64 {
        match self {
            Cutoff::None => 1.0,
            Cutoff::Exponential(_) => (-x).exp(),
            Cutoff::Drude(_) => 1.0 / (1.0 + x * x),
            Cutoff::Sharp(_) => {
                if x <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralFamily {
    Ohmic,
    SubOhmic,
    SupraOhmic,
}

/// Damping spectrum `γ̃(ω) = γ₀ (|ω|/Λ)^{s−1} f_cut(|ω|/Λ)`.
///
/// Without a cutoff the power law is taken relative to unit frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub exponent: f64,
    pub gamma0: f64,
    pub cutoff: Cutoff,
}

impl SpectralModel {
    pub fn ohmic(gamma0: f64, cutoff: Cutoff) -> Self {
        Self {
            exponent: 1.0,
            gamma0,
            cutoff,
        }
    }

    pub fn power_law(exponent: f64, gamma0: f64, cutoff: Cutoff) -> Self {
        Self {
            exponent,
            gamma0,
            cutoff,
        }
    }

    pub fn with_gamma0(mut self, gamma0: f64) -> Self {
        self.gamma0 = gamma0;
        self
    }

    pub fn family(&self) -> SpectralFamily {
        if self.exponent == 1.0 {
            SpectralFamily::Ohmic
        } else if self.exponent < 1.0 {
            SpectralFamily::SubOhmic
        } else {
            SpectralFamily::SupraOhmic
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            return Err(Error::InvalidEnvironment(format!(
                "spectral exponent must be positive, got {}",
                self.exponent
            )));
        }
        if !(self.gamma0.is_finite() && self.gamma0 >= 0.0) {
            return Err(Error::InvalidEnvironment(format!(
                "gamma0 must be non-negative, got {}",
                self.gamma0
            )));
        }
        if let Some(l) = self.cutoff.lambda() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidEnvironment(format!("cutoff must be positive, got {l}")));
            }
        }
        Ok(())
    }

    /// γ̃(ω); infinite at ω = 0 for sub-ohmic spectra.
    pub fn eval(&self, omega: f64) -> f64 {
        let scale = self.cutoff.lambda().unwrap_or(1.0);
        let x = omega.abs() / scale;
        let power = if self.exponent == 1.0 {
            1.0
        } else {
            x.powf(self.exponent - 1.0)
        };
        self.gamma0 * power * self.cutoff.factor(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ohmic_without_cutoff_is_flat() {
        let m = SpectralModel::ohmic(0.3, Cutoff::None);
        for w in [-100.0, -1.0, 0.0, 2.5, 1e6] {
            assert_eq!(m.eval(w), 0.3);
        }
        assert_eq!(m.family(), SpectralFamily::Ohmic);
    }

    #[test]
    fn cutoffs_and_power_laws() {
        let drude = SpectralModel::ohmic(2.0, Cutoff::Drude(4.0));
        assert_eq!(drude.eval(4.0), 1.0);
        assert_eq!(drude.eval(-4.0), 1.0);
        let exp = SpectralModel::power_law(3.0, 1.0, Cutoff::Exponential(2.0));
        assert!((exp.eval(2.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(exp.eval(0.0), 0.0);
        assert_eq!(exp.family(), SpectralFamily::SupraOhmic);
        let sharp = SpectralModel::ohmic(1.0, Cutoff::Sharp(1.0));
        assert_eq!(sharp.eval(0.999), 1.0);
        assert_eq!(sharp.eval(1.001), 0.0);
        let sub = SpectralModel::power_law(0.5, 1.0, Cutoff::Drude(1.0));
        assert!(sub.eval(0.0).is_infinite());
        assert_eq!(sub.family(), SpectralFamily::SubOhmic);
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(SpectralModel::power_law(0.0, 1.0, Cutoff::None).validate().is_err());
        assert!(SpectralModel::ohmic(-1.0, Cutoff::None).validate().is_err());
        assert!(SpectralModel::ohmic(1.0, Cutoff::Drude(0.0)).validate().is_err());
        assert!(SpectralModel::ohmic(1.0, Cutoff::Sharp(2.0)).validate().is_ok());
    }
}
