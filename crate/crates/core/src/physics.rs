//! Closed-form spin physics: Zeeman/Larmor relations, magnetic resonance
//! conditions, Boltzmann populations and rotational diffusion.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Fundamental constants in SI units (CODATA 2018).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// J/T
    pub bohr_magneton: f64,
    /// J·s
    pub reduced_planck: f64,
    /// J·s
    pub planck: f64,
    /// J/K
    pub boltzmann: f64,
    /// m/s
    pub speed_of_light: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
        bohr_magneton: 9.274_010_078_3e-24,
        // h/2π evaluated in full double precision; the published ħ is
        // truncated at 10 digits and would break h = 2πħ beyond 1e-10.
        reduced_planck: 6.626_070_15e-34 / (2.0 * std::f64::consts::PI),
        planck: 6.626_070_15e-34,
        boltzmann: 1.380_649e-23,
        speed_of_light: 299_792_458.0,
    };

    /// Energy of one wavenumber (cm⁻¹) in joules.
    pub fn joules_per_wavenumber(&self) -> f64 {
        self.planck * self.speed_of_light * 100.0
    }

    pub fn wavenumber_to_joules(&self, wavenumber: f64) -> f64 {
        wavenumber * self.joules_per_wavenumber()
    }

    pub fn joules_to_wavenumber(&self, energy: f64) -> f64 {
        energy / self.joules_per_wavenumber()
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}

/// Static magnetic field: magnitude in tesla along a unit axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticField {
    magnitude: f64,
    axis: [f64; 3],
}

impl MagneticField {
    pub fn new(magnitude: f64, axis: [f64; 3]) -> Result<Self> {
        ensure(magnitude.is_finite() && magnitude >= 0.0, || {
            format!("field magnitude must be finite and >= 0, got {magnitude}")
        })?;
        let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        ensure((norm - 1.0).abs() <= 1e-12, || {
            format!("field axis must be a unit vector, |axis| = {norm}")
        })?;
        Ok(Self { magnitude, axis })
    }

    /// Transverse field along the laboratory x axis.
    pub fn along_x(magnitude: f64) -> Result<Self> {
        Self::new(magnitude, [1.0, 0.0, 0.0])
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }
}

/// Isotropic g value and the Gaussian spread of g across an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GValue {
    pub iso: f64,
    pub spread_sigma: f64,
}

impl GValue {
    pub fn new(iso: f64, spread_sigma: f64) -> Result<Self> {
        let g = Self { iso, spread_sigma };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.iso.is_finite() && self.iso > 0.0, || {
            format!("g.iso must be > 0, got {}", self.iso)
        })?;
        ensure(
            self.spread_sigma.is_finite()
                && self.spread_sigma >= 0.0
                && self.spread_sigma < self.iso,
            || {
                format!(
                    "g.spread_sigma must satisfy 0 <= sigma < iso, got {}",
                    self.spread_sigma
                )
            },
        )
    }
}

/// Larmor angular frequency ω = g·μ_B·B/ħ in rad/s.
pub fn larmor_frequency(g: f64, field: f64, constants: &PhysicalConstants) -> Result<f64> {
    ensure(g.is_finite() && g > 0.0, || format!("g must be > 0, got {g}"))?;
    ensure(field.is_finite() && field >= 0.0, || {
        format!("field must be >= 0, got {field}")
    })?;
    Ok(g * constants.bohr_magneton * field / constants.reduced_planck)
}

/// Field in tesla at which a spin with the given g resonates with
/// microwave radiation of frequency `microwave_freq` (Hz): B = hν/(gμ_B).
pub fn resonance_field(g: f64, microwave_freq: f64, constants: &PhysicalConstants) -> Result<f64> {
    ensure(g.is_finite() && g > 0.0, || format!("g must be > 0, got {g}"))?;
    ensure(microwave_freq.is_finite() && microwave_freq > 0.0, || {
        format!("microwave frequency must be > 0, got {microwave_freq}")
    })?;
    Ok(constants.planck * microwave_freq / (g * constants.bohr_magneton))
}

/// g value of a resonance observed at `field` (T) and `microwave_freq` (Hz).
pub fn g_from_resonance(field: f64, microwave_freq: f64, constants: &PhysicalConstants) -> Result<f64> {
    ensure(field > 0.0 && !field.is_nan(), || format!("field must be > 0, got {field}"))?;
    ensure(microwave_freq.is_finite() && microwave_freq > 0.0, || {
        format!("microwave frequency must be > 0, got {microwave_freq}")
    })?;
    Ok(constants.planck * microwave_freq / (constants.bohr_magneton * field))
}

/// Fraction of a two-level manifold in the lower level, g_l/(g_l + g_u·e^{−Δ/k_BT}),
/// with the splitting given in cm⁻¹.
pub fn ground_level_population(
    delta_soc: f64,
    temperature: f64,
    degeneracy_lower: u32,
    degeneracy_upper: u32,
    constants: &PhysicalConstants,
) -> Result<f64> {
    ensure(delta_soc.is_finite() && delta_soc >= 0.0, || {
        format!("splitting must be >= 0 cm^-1, got {delta_soc}")
    })?;
    ensure(temperature > 0.0 && !temperature.is_nan(), || {
        format!("temperature must be > 0 K, got {temperature}")
    })?;
    ensure(degeneracy_lower >= 1 && degeneracy_upper >= 1, || {
        "degeneracies must be >= 1".to_string()
    })?;
    let ratio = constants.wavenumber_to_joules(delta_soc) / (constants.boltzmann * temperature);
    let gl = f64::from(degeneracy_lower);
    let gu = f64::from(degeneracy_upper);
    Ok(gl / (gl + gu * (-ratio).exp()))
}

/// Default hydrodynamic radius of the hexachloroiridate anion, metres.
pub const DEFAULT_HYDRODYNAMIC_RADIUS: f64 = 0.35e-9;

/// Stokes–Einstein–Debye rotational correlation time τ = 4πηr³/(3k_BT).
///
/// Viscosity in Pa·s, radius in metres, temperature in kelvin.
pub fn rotational_correlation_time(
    viscosity: f64,
    hydrodynamic_radius: f64,
    temperature: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    for (name, v) in [
        ("viscosity", viscosity),
        ("hydrodynamic radius", hydrodynamic_radius),
        ("temperature", temperature),
    ] {
        ensure(v.is_finite() && v > 0.0, || format!("{name} must be > 0, got {v}"))?;
    }
    let volume = 4.0 * std::f64::consts::PI * hydrodynamic_radius.powi(3) / 3.0;
    Ok(viscosity * volume / (constants.boltzmann * temperature))
}
