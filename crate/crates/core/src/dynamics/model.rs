use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::physics::{GValue, PhysicalConstants};

/// Pump energy (J) at which `NoiseModel::signal_per_molar` is specified.
pub const REFERENCE_PUMP_ENERGY: f64 = 1.0e-6;

/// Member-level dephasing law T2(η) = intercept + slope·η with a T1 ceiling.
///
/// Viscosity η is in mPa·s, times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceModel {
    /// Seconds.
    pub t2_intercept: f64,
    /// Seconds per mPa·s.
    pub t2_slope: f64,
    /// Seconds.
    pub t1: f64,
}

impl DecoherenceModel {
    /// T2 of a single ensemble member at viscosity `viscosity` (mPa·s).
    pub fn member_t2(&self, viscosity: f64) -> Result<f64> {
        ensure(viscosity > 0.0 && viscosity.is_finite(), || {
            format!("viscosity must be > 0 mPa·s, got {viscosity}")
        })?;
        let t2 = self.t2_intercept + self.t2_slope * viscosity;
        ensure(t2 > 0.0 && t2.is_finite(), || {
            format!("dephasing law gives non-positive T2 = {t2} s at {viscosity} mPa·s")
        })?;
        Ok(t2)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.t2_intercept.is_finite() && self.t2_slope.is_finite(), || {
            "dephasing law coefficients must be finite".into()
        })?;
        ensure(self.t1 > 0.0 && !self.t1.is_nan(), || {
            format!("T1 must be > 0, got {}", self.t1)
        })
    }
}

/// Ensemble T2* including the field-induced broadening from the g spread:
/// 1/T2* = 1/T2(η) + σ_g·μ_B·B/(√2·ħ).
pub fn effective_t2star(
    model: &DecoherenceModel,
    viscosity: f64,
    field: f64,
    g: &GValue,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let t2 = model.member_t2(viscosity)?;
    g.validate()?;
    ensure(field.is_finite(), || "field must be finite".into())?;
    let broadening = g.spread_sigma * constants.bohr_magneton * field.abs()
        / (std::f64::consts::SQRT_2 * constants.reduced_planck);
    Ok(1.0 / (1.0 / t2 + broadening))
}

/// How the probe signal follows the excited-state population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitedStateCoupling {
    /// Signal independent of excited-state decay.
    #[default]
    Decoupled,
    /// Signal scaled by exp(−t/lifetime).
    PopulationDecay,
}

pub fn excited_state_weight(t: f64, lifetime: f64, coupling: ExcitedStateCoupling) -> Result<f64> {
    ensure(lifetime > 0.0 && !lifetime.is_nan(), || {
        format!("excited-state lifetime must be > 0, got {lifetime}")
    })?;
    ensure(t >= 0.0, || format!("delay must be >= 0, got {t}"))?;
    Ok(match coupling {
        ExcitedStateCoupling::Decoupled => 1.0,
        ExcitedStateCoupling::PopulationDecay => (-t / lifetime).exp(),
    })
}

/// Cubic field dependence of the oscillation phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseModel {
    /// Radians.
    pub phi0: f64,
    /// Radians per T³.
    pub cubic_coeff: f64,
}

/// φ(B) = φ0 + c·B³.
pub fn phase_offset(field: f64, phi0: f64, cubic_coeff: f64) -> f64 {
    phi0 + cubic_coeff * field.powi(3)
}

/// Time-zero optical Kerr artifact: a Gaussian of standard deviation `width`.
/// `odd_fraction` of it flips sign with pump helicity and therefore survives
/// demodulation; the rest is even.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OkeArtifact {
    pub amplitude: f64,
    /// Seconds.
    pub width: f64,
    pub odd_fraction: f64,
}

impl OkeArtifact {
    pub fn none() -> Self {
        Self {
            amplitude: 0.0,
            width: 50e-15,
            odd_fraction: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.amplitude >= 0.0 && self.amplitude.is_finite(), || {
            format!("OKE amplitude must be >= 0, got {}", self.amplitude)
        })?;
        ensure(self.width > 0.0 && self.width.is_finite(), || {
            format!("OKE width must be > 0, got {}", self.width)
        })?;
        ensure((0.0..=1.0).contains(&self.odd_fraction), || {
            format!("OKE odd fraction must lie in [0, 1], got {}", self.odd_fraction)
        })
    }

    fn profile(&self, t: f64) -> f64 {
        self.amplitude * (-0.5 * (t / self.width).powi(2)).exp()
    }

    /// Helicity-independent part at delay `t`.
    pub fn even(&self, t: f64) -> f64 {
        (1.0 - self.odd_fraction) * self.profile(t)
    }

    /// Part that follows the pump helicity, given for left helicity.
    pub fn odd(&self, t: f64) -> f64 {
        self.odd_fraction * self.profile(t)
    }
}

impl Default for OkeArtifact {
    fn default() -> Self {
        Self {
            amplitude: 0.0,
            width: 50e-15,
            odd_fraction: 0.05,
        }
    }
}

/// Signal scale and additive detection noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Standard deviation of the additive Gaussian noise, signal units.
    pub additive_sigma: f64,
    /// Spin-signal amplitude per mol/L at full initialisation and the
    /// reference pump energy.
    pub signal_per_molar: f64,
    pub rng_seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        ensure(self.additive_sigma >= 0.0 && self.additive_sigma.is_finite(), || {
            format!("additive noise sigma must be >= 0, got {}", self.additive_sigma)
        })?;
        ensure(self.signal_per_molar.is_finite(), || {
            "signal_per_molar must be finite".into()
        })
    }
}
