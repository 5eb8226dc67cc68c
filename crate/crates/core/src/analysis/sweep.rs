use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{extract_g_from_sweep, FieldPoint, GEstimate};
use super::viscosity::{viscosity_regression, ViscosityLine, ViscosityPoint};
use crate::dynamics::{simulate_trace, ExperimentConfig};
use crate::error::{Error, Result};
use crate::fit::{extract_t2star, FitResult};
use crate::physics::PhysicalConstants;
use crate::trace::TraceSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Tesla.
    Field,
    /// mPa·s.
    Viscosity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDerived {
    G(GEstimate),
    Viscosity(ViscosityLine),
}

/// One fit per axis value plus the regression over all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub fits: Vec<FitResult>,
    pub derived: SweepDerived,
    #[serde(skip)]
    pub traces: Vec<TraceSeries>,
}

fn check_axis(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Validation("sweep has no points".into()));
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::Validation("sweep axis must be strictly monotone".into()));
    }
    Ok(())
}

/// Seeds for point `index` of a sweep derived from the base seeds.
fn point_config(base: &ExperimentConfig, index: usize) -> ExperimentConfig {
    let mut c = base.clone();
    c.rng_seed = base.rng_seed.wrapping_add(index as u64);
    c.noise.rng_seed = base.noise.rng_seed.wrapping_add(index as u64);
    c
}

fn simulate_and_fit(config: &ExperimentConfig, fit_start: f64) -> Result<(TraceSeries, FitResult)> {
    let trace = simulate_trace(config)?;
    let fit = extract_t2star(&trace, config.field, fit_start)?;
    Ok((trace, fit))
}

/// Simulates and fits a trace at each field and extracts g from the
/// fitted precession frequencies.
pub fn field_sweep(base: &ExperimentConfig, fields: &[f64], fit_start: f64) -> Result<SweepResult> {
    check_axis(fields)?;
    let runs = fields
        .par_iter()
        .enumerate()
        .map(|(i, &b)| {
            let mut c = point_config(base, i);
            c.field = b;
            simulate_and_fit(&c, fit_start)
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<FieldPoint> = fields
        .iter()
        .zip(&runs)
        .map(|(&b, (_, fit))| FieldPoint {
            field: b,
            omega: fit.value("omega").unwrap_or(0.0),
            sigma: fit.sigma("omega"),
        })
        .collect();
    let g = extract_g_from_sweep(&points, &PhysicalConstants::CODATA_2018)?;
    let (traces, fits) = runs.into_iter().unzip();
    Ok(SweepResult {
        axis: SweepAxis::Field,
        values: fields.to_vec(),
        fits,
        derived: SweepDerived::G(g),
        traces,
    })
}

/// Simulates and fits a trace at each viscosity (mPa·s) and regresses T2*
/// on viscosity.
pub fn viscosity_sweep(base: &ExperimentConfig, viscosities: &[f64], fit_start: f64) -> Result<SweepResult> {
    check_axis(viscosities)?;
    let runs = viscosities
        .par_iter()
        .enumerate()
        .map(|(i, &eta)| {
            let mut c = point_config(base, i);
            c.viscosity = eta;
            simulate_and_fit(&c, fit_start)
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<ViscosityPoint> = viscosities
        .iter()
        .zip(&runs)
        .map(|(&eta, (_, fit))| ViscosityPoint {
            viscosity: eta,
            t2star: fit.value("t2star").expect("damped cosine"),
            sigma: fit.sigma("t2star"),
        })
        .collect();
    let line = viscosity_regression(&points)?;
    let (traces, fits) = runs.into_iter().unzip();
    Ok(SweepResult {
        axis: SweepAxis::Viscosity,
        values: viscosities.to_vec(),
        fits,
        derived: SweepDerived::Viscosity(line),
        traces,
    })
}
