use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::physics::PhysicalConstants;

/// Circular polarisation of a pump pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Helicity {
    Left,
    Right,
}

impl Helicity {
    /// +1 for left (polarisation initialised along +z), −1 for right.
    pub fn sign(self) -> f64 {
        match self {
            Helicity::Left => 1.0,
            Helicity::Right => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Helicity::Left => Helicity::Right,
            Helicity::Right => Helicity::Left,
        }
    }
}

/// Spin polarisation of one ensemble member with its own g and local field offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub polarization: [f64; 3],
    pub member_g: f64,
    /// Tesla, added to the applied field.
    pub member_field_offset: f64,
}

impl BlochState {
    pub fn new(polarization: [f64; 3], member_g: f64, member_field_offset: f64) -> Result<Self> {
        let norm = polarization.iter().map(|p| p * p).sum::<f64>().sqrt();
        ensure(norm <= 1.0 + 1e-9, || format!("|polarization| = {norm} exceeds 1"))?;
        ensure(member_g.is_finite() && member_g > 0.0, || {
            format!("member g must be > 0, got {member_g}")
        })?;
        ensure(member_field_offset.is_finite(), || "field offset must be finite".into())?;
        Ok(Self {
            polarization,
            member_g,
            member_field_offset,
        })
    }

    pub fn norm(&self) -> f64 {
        self.polarization.iter().map(|p| p * p).sum::<f64>().sqrt()
    }
}

/// Polarisation left by a circularly polarised pump: (0, 0, ±efficiency).
pub fn initialize_polarization(helicity: Helicity, efficiency: f64) -> Result<[f64; 3]> {
    ensure((0.0..=1.0).contains(&efficiency), || {
        format!("initialization efficiency must lie in [0, 1], got {efficiency}")
    })?;
    Ok([0.0, 0.0, helicity.sign() * efficiency])
}

pub(crate) fn check_relaxation_times(t2: f64, t1: f64) -> Result<()> {
    ensure(t2 > 0.0 && !t2.is_nan(), || format!("T2 must be > 0, got {t2}"))?;
    ensure(t1 > 0.0 && !t1.is_nan(), || format!("T1 must be > 0, got {t1}"))?;
    ensure(t1 >= t2 / 2.0, || {
        format!("T2 = {t2} s exceeds the 2·T1 ceiling (T1 = {t1} s)")
    })
}

/// Exact propagator over a fixed interval for a static field along x:
/// rotation of (y, z) about x combined with exponential relaxation.
/// Equilibrium polarisation is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochPropagator {
    cos: f64,
    sin: f64,
    transverse_decay: f64,
    longitudinal_decay: f64,
    dt: f64,
}

impl BlochPropagator {
    pub fn new(
        member_g: f64,
        field_along_x: f64,
        t2: f64,
        t1: f64,
        dt: f64,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        check_relaxation_times(t2, t1)?;
        ensure(dt >= 0.0 && dt.is_finite(), || format!("dt must be >= 0, got {dt}"))?;
        ensure(field_along_x.is_finite(), || "field must be finite".into())?;
        let omega = member_g * constants.bohr_magneton * field_along_x / constants.reduced_planck;
        let (sin, cos) = (omega * dt).sin_cos();
        Ok(Self {
            cos,
            sin,
            transverse_decay: (-dt / t2).exp(),
            longitudinal_decay: (-dt / t1).exp(),
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = p;
        [
            x * self.longitudinal_decay,
            (y * self.cos - z * self.sin) * self.transverse_decay,
            (y * self.sin + z * self.cos) * self.transverse_decay,
        ]
    }
}

/// Advances `state` by `dt` in a static field along x (member offset included).
pub fn evolve_bloch(
    state: &BlochState,
    field_along_x: f64,
    t2: f64,
    t1: f64,
    dt: f64,
    constants: &PhysicalConstants,
) -> Result<BlochState> {
    let prop = BlochPropagator::new(
        state.member_g,
        field_along_x + state.member_field_offset,
        t2,
        t1,
        dt,
        constants,
    )?;
    Ok(BlochState {
        polarization: prop.apply(state.polarization),
        ..*state
    })
}
