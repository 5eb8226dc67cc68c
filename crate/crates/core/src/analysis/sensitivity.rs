use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_trace, ExperimentConfig};
use crate::error::{Error, Result};
use crate::fit::{extract_t2star, FitResult};

/// Optional linear rescaling of the signal with pump pulse energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpScaling {
    /// Joules.
    pub reference_energy: f64,
    /// Joules.
    pub new_energy: f64,
}

/// Lowest concentration that still reaches `threshold_snr`, assuming the
/// signal is proportional to concentration (and optionally to pump energy)
/// over a fixed additive noise floor.
pub fn detection_limit(
    reference_concentration: f64,
    reference_snr: f64,
    threshold_snr: f64,
    pump: Option<PumpScaling>,
) -> Result<f64> {
    for (name, v) in [
        ("reference concentration", reference_concentration),
        ("reference SNR", reference_snr),
        ("threshold SNR", threshold_snr),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
        }
    }
    let mut c_min = reference_concentration * threshold_snr / reference_snr;
    if let Some(p) = pump {
        if !(p.reference_energy > 0.0 && p.new_energy > 0.0) {
            return Err(Error::Domain("pump energies must be > 0".into()));
        }
        c_min *= p.reference_energy / p.new_energy;
    }
    Ok(c_min)
}

/// Simulates `config`, fits it and reports |η₀| over the RMS fit residual.
pub fn measure_snr(config: &ExperimentConfig, fit_start: f64) -> Result<(f64, FitResult)> {
    let trace = simulate_trace(config)?;
    let fit = extract_t2star(&trace, config.field, fit_start)?;
    let rms = fit.residual_norm / (fit.n_points as f64).sqrt();
    if !(rms > 0.0) {
        return Err(Error::Domain("noise-free trace has no finite SNR".into()));
    }
    let eta0 = fit.value("eta0").expect("damped cosine amplitude");
    Ok((eta0.abs() / rms, fit))
}
