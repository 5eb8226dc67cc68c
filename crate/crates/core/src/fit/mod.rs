//! Damped least-squares fitting and the relaxation model library.

mod guess;
mod models;
mod solver;

pub use guess::{initial_guess_damped_cosine, DampedCosineGuess};
pub use models::{
    model_damped_cosine, model_exponential, model_hahn_echo, model_inversion_recovery, ModelId,
};
pub use solver::{nonlinear_least_squares, Bounds, FitOptions, FitResult, FittedParameter, ModelSpec};

use crate::error::Result;
use crate::physics::{larmor_frequency, PhysicalConstants};
use crate::trace::TraceSeries;

const FREE_ELECTRON_G: f64 = 2.002_319_304;

/// Default start of the free-induction fit window, seconds.
pub const DEFAULT_FIT_START: f64 = 0.5e-12;

/// Fits the damped cosine to `trace` from `fit_start` to its last sample.
/// At zero field ω and φ are held at zero, leaving a pure exponential.
pub fn extract_t2star(trace: &TraceSeries, field: f64, fit_start: f64) -> Result<FitResult> {
    extract_t2star_with(trace, field, fit_start, &FitOptions::default())
}

pub fn extract_t2star_with(
    trace: &TraceSeries,
    field: f64,
    fit_start: f64,
    options: &FitOptions,
) -> Result<FitResult> {
    let end = trace.times().last().copied().unwrap_or(fit_start);
    let window = (fit_start, end);
    let guess = initial_guess_damped_cosine(trace, window)?;
    let mut init = guess.params;
    let mut spec = ModelSpec::new(ModelId::DampedCosine);
    if field == 0.0 {
        init[2] = 0.0;
        init[3] = 0.0;
        spec = spec.fix("omega")?.fix("phi")?;
    } else if init[2] <= 0.0 {
        // Window shorter than a period: the spectrum has no peak, so start
        // from the free-electron precession frequency instead.
        init[2] = larmor_frequency(FREE_ELECTRON_G, field, &PhysicalConstants::CODATA_2018)?;
        init[3] = 0.0;
    }
    nonlinear_least_squares(&spec, trace, &init, window, options)
}
