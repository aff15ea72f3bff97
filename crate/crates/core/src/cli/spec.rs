//! INI-style experiment specifications.
//!
//! ```text
//! [environment]
//! state = thermal
//! temperature = 1.0
//!
//! [spectral]
//! gamma0 = 0.01
//! cutoff = drude
//! lambda = 50
//! ```
//!
//! Lines starting with `#` or `;` are comments. Every section and key is
//! checked against a fixed vocabulary so typos fail loudly.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::environments::{Cutoff, DiscreteEnvironment, EnvironmentState, SpectralModel, Table};
use crate::error::{Error, Result};
use crate::kernels::FrequencyGrid;
use crate::langevin::{SimulationConfig, SimulationMode};
use crate::linalg::CMatrix;
use crate::qbm::OscillatorBank;

const VOCABULARY: &[(&str, &[&str])] = &[
    ("environment", &["state", "temperature", "squeezing"]),
    (
        "spectral",
        &["family", "exponent", "gamma0", "cutoff", "lambda", "response"],
    ),
    ("grid", &["omega_max", "n_points"]),
    ("system", &["mass", "frequency", "n_modes", "mixing"]),
    (
        "run",
        &[
            "seed",
            "tolerance",
            "n_trajectories",
            "mode",
            "steps_per_period",
            "burn_in",
            "measure",
            "n_batches",
            "memory_time",
            "t_max",
            "dt",
        ],
    ),
    (
        "discrete",
        &["levels", "probs", "temperature", "broadening", "n_couplings"],
    ),
];

/// Raw `section → key → value` map after overrides.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentSpec {
    values: BTreeMap<String, BTreeMap<String, String>>,
}

fn spec_error(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn check_known(section: &str, key: &str) -> Result<()> {
    let keys = VOCABULARY
        .iter()
        .find(|(s, _)| *s == section)
        .map(|(_, k)| *k)
        .ok_or_else(|| spec_error(format!("unknown section [{section}]")))?;
    if !keys.contains(&key) {
        return Err(spec_error(format!("unknown key '{key}' in [{section}]")));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut section: Option<String> = None;
        for (number, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let at = |msg: String| spec_error(format!("line {}: {msg}", number + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(format!("malformed section header '{line}'")))?
                    .trim();
                if !VOCABULARY.iter().any(|(s, _)| *s == name) {
                    return Err(at(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let current = section
                .as_deref()
                .ok_or_else(|| at("key outside of any section".into()))?;
            check_known(current, key).map_err(|e| at(e.to_string()))?;
            let entry = spec.values.entry(current.to_string()).or_default();
            if entry.insert(key.to_string(), value.to_string()).is_some() {
                return Err(at(format!("duplicate key '{key}' in [{current}]")));
            }
        }
        Ok(spec)
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| spec_error(format!("override '{assignment}' is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| spec_error(format!("override '{assignment}' is not section.key=value")))?;
        check_known(section, key)?;
        self.values
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn values(&self) -> &BTreeMap<String, BTreeMap<String, String>> {
        &self.values
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| spec_error(format!("missing {section}.{key}")))
    }

    fn number(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.get(section, key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| spec_error(format!("{section}.{key} = '{v}' is not a finite number")))
            })
            .transpose()
    }

    fn required_number(&self, section: &str, key: &str) -> Result<f64> {
        self.number(section, key)?
            .ok_or_else(|| spec_error(format!("missing {section}.{key}")))
    }

    fn integer(&self, section: &str, key: &str) -> Result<Option<u64>> {
        self.get(section, key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| spec_error(format!("{section}.{key} = '{v}' is not a non-negative integer")))
            })
            .transpose()
    }

    fn list(&self, section: &str, key: &str) -> Result<Vec<f64>> {
        self.require(section, key)?
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| spec_error(format!("{section}.{key}: '{s}' is not a finite number")))
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.integer("run", "seed")?.unwrap_or(0))
    }

    pub fn tolerance(&self) -> Result<f64> {
        let tol = self.number("run", "tolerance")?.unwrap_or(1e-9);
        if tol < 0.0 {
            return Err(spec_error("run.tolerance must be non-negative"));
        }
        Ok(tol)
    }

    pub fn state(&self) -> Result<EnvironmentState> {
        let temperature = || self.required_number("environment", "temperature");
        let state = match self.require("environment", "state")? {
            "thermal" => EnvironmentState::Thermal {
                temperature: temperature()?,
            },
            "zero_temperature" => EnvironmentState::ZeroTemperature,
            "negative_temperature" => EnvironmentState::NegativeTemperature {
                temperature: temperature()?,
            },
            "squeezed" => EnvironmentState::Squeezed {
                temperature: self.number("environment", "temperature")?.unwrap_or(0.0),
                squeezing: self.squeezing()?,
            },
            "classical" => EnvironmentState::Classical {
                temperature: temperature()?,
            },
            other => return Err(spec_error(format!("unknown environment.state '{other}'"))),
        };
        state.validate()?;
        Ok(state)
    }

    /// A constant `r`, or `ω:r` pairs separated by commas.
    fn squeezing(&self) -> Result<Table> {
        let raw = self.require("environment", "squeezing")?;
        if !raw.contains(':') {
            let r = raw
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| spec_error(format!("environment.squeezing = '{raw}' is not a number or table")))?;
            return Ok(Table::constant(r));
        }
        let points = raw
            .split(',')
            .map(|pair| {
                let (w, r) = pair
                    .split_once(':')
                    .ok_or_else(|| spec_error(format!("squeezing entry '{pair}' is not omega:r")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| spec_error(format!("squeezing entry '{pair}' is not numeric")))
                };
                Ok((parse(w)?, parse(r)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Table::new(points)
    }

    pub fn spectral(&self) -> Result<SpectralModel> {
        let gamma0 = self.required_number("spectral", "gamma0")?;
        let family_exponent = match self.get("spectral", "family") {
            None | Some("ohmic") => None,
            Some("sub_ohmic") | Some("supra_ohmic") => Some(self.required_number("spectral", "exponent")?),
            Some(other) => return Err(spec_error(format!("unknown spectral.family '{other}'"))),
        };
        let exponent = match (family_exponent, self.get("spectral", "family")) {
            (Some(s), Some("sub_ohmic")) if s >= 1.0 => {
                return Err(spec_error("sub_ohmic needs spectral.exponent < 1"));
            }
            (Some(s), Some("supra_ohmic")) if s <= 1.0 => {
                return Err(spec_error("supra_ohmic needs spectral.exponent > 1"));
            }
            (Some(s), _) => s,
            (None, _) => self.number("spectral", "exponent")?.unwrap_or(1.0),
        };
        let lambda = || self.required_number("spectral", "lambda");
        let cutoff = match self.get("spectral", "cutoff").unwrap_or("none") {
            "none" => Cutoff::None,
            "drude" => Cutoff::Drude(lambda()?),
            "exponential" => Cutoff::Exponential(lambda()?),
            "sharp" => Cutoff::Sharp(lambda()?),
            other => return Err(spec_error(format!("unknown spectral.cutoff '{other}'"))),
        };
        let model = SpectralModel::power_law(exponent, gamma0, cutoff);
        model.validate()?;
        Ok(model)
    }

    /// `response = amplifying` flips the sign of the damping kernel.
    pub fn amplifying(&self) -> Result<bool> {
        match self.get("spectral", "response").unwrap_or("damping") {
            "damping" => Ok(false),
            "amplifying" => Ok(true),
            other => Err(spec_error(format!("unknown spectral.response '{other}'"))),
        }
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        let n = self
            .integer("grid", "n_points")?
            .ok_or_else(|| spec_error("missing grid.n_points"))?;
        FrequencyGrid::new(n as usize, self.required_number("grid", "omega_max")?)
    }

    pub fn bank(&self) -> Result<OscillatorBank> {
        let n = self.integer("system", "n_modes")?.unwrap_or(1) as usize;
        OscillatorBank::new(
            n,
            self.number("system", "mass")?.unwrap_or(1.0),
            self.required_number("system", "frequency")?,
        )
    }

    /// `identity` or real rows separated by `;`, entries by `,`.
    pub fn mixing(&self, n: usize) -> Result<CMatrix> {
        match self.get("system", "mixing").unwrap_or("identity") {
            "identity" => Ok(CMatrix::identity(n, n)),
            raw => {
                let rows: Vec<Vec<f64>> = raw
                    .split(';')
                    .map(|row| {
                        row.split(',')
                            .map(|s| {
                                s.trim()
                                    .parse::<f64>()
                                    .map_err(|_| spec_error(format!("mixing entry '{s}' is not numeric")))
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()?;
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(spec_error(format!("system.mixing must be {n}x{n}")));
                }
                Ok(CMatrix::from_fn(n, n, |r, c| Complex64::new(rows[r][c], 0.0)))
            }
        }
    }

    pub fn simulation(&self) -> Result<(SimulationConfig, usize)> {
        let defaults = SimulationConfig::default();
        let mode = match self.get("run", "mode").unwrap_or("local") {
            "local" => SimulationMode::Local,
            "memory" => SimulationMode::Memory,
            other => return Err(spec_error(format!("unknown run.mode '{other}'"))),
        };
        let n_trajectories = self.integer("run", "n_trajectories")?.unwrap_or(100) as usize;
        if n_trajectories == 0 {
            return Err(spec_error("run.n_trajectories must be positive"));
        }
        let config = SimulationConfig {
            mode,
            steps_per_period: self
                .integer("run", "steps_per_period")?
                .map_or(defaults.steps_per_period, |v| v as usize),
            burn_in_relaxations: self.number("run", "burn_in")?.unwrap_or(defaults.burn_in_relaxations),
            measure_relaxations: self.number("run", "measure")?.unwrap_or(defaults.measure_relaxations),
            memory_time: self.number("run", "memory_time")?,
            n_batches: self
                .integer("run", "n_batches")?
                .map_or(defaults.n_batches, |v| v as usize),
            initial: None,
        };
        Ok((config, n_trajectories))
    }

    /// Master-equation evaluation time and quadrature step, if both are set.
    pub fn me_window(&self) -> Result<Option<(f64, f64)>> {
        match (self.number("run", "t_max")?, self.number("run", "dt")?) {
            (Some(t), Some(dt)) if t > 0.0 && dt > 0.0 => Ok(Some((t, dt))),
            (None, None) => Ok(None),
            _ => Err(spec_error("run.t_max and run.dt must both be set and positive")),
        }
    }

    /// Levels, probabilities, broadening and number of coupling sets.
    pub fn discrete(&self) -> Result<(Vec<f64>, Vec<f64>, f64, usize)> {
        let levels = self.list("discrete", "levels")?;
        let probs = match self.get("discrete", "probs").unwrap_or("thermal") {
            "thermal" => {
                crate::environments::thermal_probabilities(&levels, self.required_number("discrete", "temperature")?)?
            }
            _ => self.list("discrete", "probs")?,
        };
        let broadening = self.required_number("discrete", "broadening")?;
        let n_couplings = self.integer("discrete", "n_couplings")?.unwrap_or(20) as usize;
        // validates the level data before any heavy work
        DiscreteEnvironment::new(
            levels.clone(),
            probs.clone(),
            vec![CMatrix::zeros(levels.len(), levels.len())],
            broadening,
        )?;
        Ok((levels, probs, broadening, n_couplings))
    }
}
