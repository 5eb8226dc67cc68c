//! Multi-trace studies: g from field sweeps, viscosity sensing, T1
//! extrapolation, detection limits and pulse-EPR deadtime.

mod deadtime;
mod field;
mod relaxation;
mod sensitivity;
mod sweep;
mod viscosity;

pub use deadtime::{deadtime_truncate, TruncatedTrace, DEFAULT_DEADTIME, DEFAULT_INCREMENT};
pub use field::{extract_g_from_sweep, FieldPoint, GEstimate};
pub use relaxation::{extrapolate_t1, Extrapolation, ExtrapolationMode, RelaxationKind, RelaxationSeries};
pub use sensitivity::{detection_limit, measure_snr, PumpScaling};
pub use sweep::{field_sweep, viscosity_sweep, SweepAxis, SweepDerived, SweepResult};
pub use viscosity::{
    glycerol_viscosity, glycerol_viscosity_by_volume, viscosity_regression, ViscosityLine, ViscosityPoint,
};
