//! Forward model of pump-initialised spin polarisation precessing and
//! dephasing in a transverse field, averaged over an inhomogeneous ensemble.

mod bloch;
mod config;
mod model;
mod simulate;

pub use bloch::{evolve_bloch, initialize_polarization, BlochPropagator, BlochState, Helicity};
pub use config::{Detection, ExperimentConfig, TimeGrid, DEFAULT_SEED};
pub use model::{
    effective_t2star, excited_state_weight, phase_offset, DecoherenceModel, ExcitedStateCoupling,
    NoiseModel, OkeArtifact, PhaseModel, REFERENCE_PUMP_ENERGY,
};
pub use simulate::{noise_free_spin_signal, simulate_trace, spin_amplitude};
