use serde::{Deserialize, Serialize};

use super::bloch::{check_relaxation_times, Helicity};
use super::model::{DecoherenceModel, ExcitedStateCoupling, NoiseModel, OkeArtifact, PhaseModel};
use crate::analysis::glycerol_viscosity;
use crate::error::{ensure, Error, Result};
use crate::physics::{GValue, MagneticField};

/// Pump-probe delays in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGrid {
    Uniform { start: f64, stop: f64, step: f64 },
    Explicit(Vec<f64>),
}

impl TimeGrid {
    pub fn uniform(start: f64, stop: f64, step: f64) -> Self {
        TimeGrid::Uniform { start, stop, step }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        let times = match self {
            TimeGrid::Uniform { start, stop, step } => {
                if !(step.is_finite() && *step > 0.0 && start.is_finite() && stop >= start) {
                    return Err(Error::Validation(format!(
                        "uniform grid needs step > 0 and stop >= start (start {start}, stop {stop}, step {step})"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| start + i as f64 * step).collect()
            }
            TimeGrid::Explicit(t) => t.clone(),
        };
        if times.is_empty() {
            return Err(Error::Validation("time grid is empty".into()));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(format!(
                "time grid not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(times)
    }
}

/// How the simulated trace is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Pump-odd signal referenced to `pump_helicity`: even artifacts removed.
    #[default]
    Demodulated,
    /// Probe signal after a single pump helicity, including even artifacts.
    SingleHelicity,
}

/// Complete description of one synthetic experiment. SI units except
/// viscosity (mPa·s) and concentration (mol/L).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Tesla, applied along x.
    pub field: f64,
    pub g: GValue,
    pub decoherence: DecoherenceModel,
    /// mPa·s.
    pub viscosity: f64,
    /// Kelvin.
    pub temperature: f64,
    /// mol/L.
    pub concentration: f64,
    /// Joules per pulse.
    pub pump_energy: f64,
    pub pump_helicity: Helicity,
    pub initialization_efficiency: f64,
    /// Seconds.
    pub excited_state_lifetime: f64,
    #[serde(default)]
    pub excited_state_coupling: ExcitedStateCoupling,
    #[serde(default)]
    pub phase: PhaseModel,
    pub oke: OkeArtifact,
    pub noise: NoiseModel,
    #[serde(default)]
    pub detection: Detection,
    pub time_grid: TimeGrid,
    pub ensemble_size: usize,
    pub rng_seed: u64,
}

/// Default seed used whenever none is supplied.
pub const DEFAULT_SEED: u64 = 1014;

impl ExperimentConfig {
    /// 2 mM hexachloroiridate in water at room temperature and zero field.
    pub fn h2o_default() -> Self {
        let eta40 = glycerol_viscosity(0.40, 293.15).expect("inside correlation window");
        let slope = (21.9e-12 - 8.60e-12) / (eta40 - 1.0);
        Self {
            field: 0.0,
            g: GValue {
                iso: 1.74,
                spread_sigma: 0.0174,
            },
            decoherence: DecoherenceModel {
                t2_intercept: 8.60e-12 - slope,
                t2_slope: slope,
                t1: 1e-9,
            },
            viscosity: 1.0,
            temperature: 294.0,
            concentration: 2e-3,
            pump_energy: 1e-6,
            pump_helicity: Helicity::Left,
            initialization_efficiency: 1.0,
            excited_state_lifetime: 17e-12,
            excited_state_coupling: ExcitedStateCoupling::Decoupled,
            phase: PhaseModel::default(),
            oke: OkeArtifact {
                amplitude: 5.0,
                width: 100e-15,
                odd_fraction: 0.05,
            },
            noise: NoiseModel {
                additive_sigma: 1.0 / 300.0,
                signal_per_molar: 500.0,
                rng_seed: DEFAULT_SEED,
            },
            detection: Detection::Demodulated,
            time_grid: TimeGrid::uniform(-2e-12, 60e-12, 0.02e-12),
            ensemble_size: 10_000,
            rng_seed: DEFAULT_SEED,
        }
    }

    /// Checks every invariant of the configuration and its parts.
    pub fn validate(&self) -> Result<()> {
        MagneticField::along_x(self.field)?;
        self.g.validate()?;
        self.decoherence.validate()?;
        self.oke.validate()?;
        self.noise.validate()?;
        let t2 = self.decoherence.member_t2(self.viscosity)?;
        check_relaxation_times(t2, self.decoherence.t1)?;
        for (name, v) in [
            ("temperature", self.temperature),
            ("concentration", self.concentration),
            ("pump_energy", self.pump_energy),
            ("excited_state_lifetime", self.excited_state_lifetime),
        ] {
            ensure(v > 0.0 && v.is_finite(), || format!("{name} must be > 0, got {v}"))?;
        }
        ensure((0.0..=1.0).contains(&self.initialization_efficiency), || {
            format!(
                "initialization_efficiency must lie in [0, 1], got {}",
                self.initialization_efficiency
            )
        })?;
        ensure(
            self.phase.phi0.is_finite() && self.phase.cubic_coeff.is_finite(),
            || "phase model must be finite".into(),
        )?;
        ensure(self.ensemble_size >= 1, || "ensemble_size must be >= 1".into())?;
        self.time_grid.times()?;
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::h2o_default()
    }
}
